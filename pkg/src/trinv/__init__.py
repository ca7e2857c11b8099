"""trinv: triangular chunk-matrix inversion under emulated low precision.

Seven matrix-product-rich algorithms for inverting the unit-lower
triangular matrices that arise in delta-rule linear attention, a
bit-faithful software model of fp16/bf16/fp32 arithmetic so their
stability behaviour reproduces on any host, forward-error metrics against
a float64 oracle, and a deterministic experiment harness.
"""

from .core import (
    GENERAL,
    STRICT_LOWER,
    UNIT_LOWER,
    BlockSpec,
    TriMatrix,
    classify_kind,
    diag_blocks,
    strict_tril,
    unit_lower_from_strict,
)
from .fpsim import (
    BFLOAT16,
    FLOAT16,
    FLOAT32,
    FLOAT64,
    FORMATS,
    FloatFormat,
    PrecisionPolicy,
    default_policy,
    emulated_add,
    emulated_matmul,
    fp_add,
    fp_matmul,
    fp_mul,
    fp_sub,
    get_format,
    matmul_tally,
    quantize,
    round_to_format,
)
from .gen import (
    ChunkSet,
    PhiKind,
    chunk_sequence,
    gen_allones_worstcase,
    gen_deltanet,
    gen_gaussian_tril,
    gen_with_phi,
    strict_power_entry,
    unit_keys,
)
from .algos import (
    AlgorithmConfig,
    InversionTrace,
    ir_refine,
    mbh_invert,
    mch_error_bound,
    mch_invert,
    mcs_invert,
    mxr_invert,
    ns_invert,
    pad_pow2,
    vcs_invert,
)
from .metrics import (
    ErrorReport,
    condition_number,
    error_report,
    inverse_entry_bound_check,
    reference_inverse,
)
from .harness import (
    ExperimentSpec,
    GeneratorSpec,
    SweepResult,
    emit_plots,
    make_matrix,
    parse_generator,
    parse_method,
    run_decay_sweep,
    run_method,
    run_ns_iteration_sweep,
    run_sweep,
    verify_invariants,
)

__version__ = "0.1.0"
