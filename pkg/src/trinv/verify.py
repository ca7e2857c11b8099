"""Self-contained invariant battery behind the `verify` harness verb.

Each check is small, deterministic and independent; the battery prints one
pass/fail line per check and reports overall success. The pytest suite
covers the same ground (and more) at full strength; this battery exists so
a deployed copy can vouch for itself without a dev environment.
"""

from __future__ import annotations

import numpy as np

from . import algos, gen, harness, metrics
from .core import BlockSpec, TriMatrix, diag_blocks, strict_tril, unit_lower_from_strict
from .fpsim import (
    BFLOAT16,
    FLOAT16,
    FLOAT32,
    FLOAT64,
    PrecisionPolicy,
    default_policy,
    fp_matmul,
    matmul_tally,
    quantize,
    round_to_format,
)

F64 = PrecisionPolicy(FLOAT64, FLOAT64)


def _frel(truth: TriMatrix, x: TriMatrix) -> float:
    d = truth.data - x.data
    return float(np.sqrt(np.sum(d * d)) / np.sqrt(np.sum(truth.data ** 2)))


def check_rounding_matches_native_casts():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(4096) * np.exp(rng.uniform(-30, 30, 4096))
    with np.errstate(all="ignore"):
        ok = np.array_equal(round_to_format(x, FLOAT16), x.astype(np.float16).astype(np.float64))
        ok &= np.array_equal(round_to_format(x, FLOAT32), x.astype(np.float32).astype(np.float64))
        ok &= np.array_equal(round_to_format(x, FLOAT64), x)
    return ok


def check_rounding_monotone_idempotent():
    rng = np.random.default_rng(12)
    x = np.sort(rng.standard_normal(2000) * 10.0 ** rng.integers(-8, 8, 2000))
    with np.errstate(all="ignore"):
        for fmt in (FLOAT16, BFLOAT16, FLOAT32):
            r = round_to_format(x, fmt)
            if not np.all(r[1:] >= r[:-1]):  # inf-safe monotonicity
                return False
            if not np.array_equal(round_to_format(r, fmt), r):
                return False
            normal = (np.abs(x) >= 2.0 ** fmt.emin) & (np.abs(x) <= fmt.max_finite)
            if np.any(np.abs(r[normal] - x[normal]) > fmt.u * np.abs(x[normal])):
                return False
    return True


def check_exponent_range_asymmetry():
    return (round_to_format(7e4, FLOAT16) == float("inf")
            and np.isfinite(round_to_format(7e4, BFLOAT16))
            and round_to_format(65504.0, FLOAT16) == 65504.0)


def check_matmul_against_host_loop():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    got = fp_matmul(a, b, F64)
    want = np.empty((16, 16))
    for i in range(16):
        for j in range(16):
            s = 0.0
            for k in range(16):
                s = s + a[i, k] * b[k, j]
            want[i, j] = s
    return np.array_equal(got, want)


def check_block_parity_partition():
    a = gen.gen_deltanet(8, seed=3)
    ev = diag_blocks(a, BlockSpec(2), "even").data
    od = diag_blocks(a, 2, "odd").data
    al = diag_blocks(a, 2, "all").data
    base = diag_blocks(TriMatrix.identity(2), 1, "even").data
    return (np.array_equal(ev + od, al) and np.array_equal(base, np.diag([1.0, 0.0]))
            and np.array_equal(strict_tril(strict_tril(a)).data, strict_tril(a).data)
            and np.array_equal(unit_lower_from_strict(strict_tril(a)).data, a.data))


def check_wellconditioned_family():
    for corr in (0.0, harness.HARD_KEY_CORR):
        for seed in range(4):
            a = gen.gen_deltanet(32, seed=seed, key_corr=corr)
            if np.max(np.abs(a.data)) > 1.0 or metrics.condition_number(a) > 32.0 ** 2:
                return False
            if not metrics.inverse_entry_bound_check(a):
                return False
    return True


def check_random_triangular_contrast():
    kappas = [metrics.condition_number(gen.gen_gaussian_tril(64, seed=s)) for s in range(11)]
    return float(np.median(kappas)) > 10.0 * 64.0 ** 2


def check_binomial_growth_witness():
    n = 16
    l = strict_tril(gen.gen_allones_worstcase(n, +1))
    y = l.data
    k = 1
    while 2 * k <= n:
        y = fp_matmul(y, y, F64)
        k *= 2
        for i in range(1, n + 1):
            for j in range(1, i):
                if y[i - 1, j - 1] != gen.strict_power_entry(n, k, i, j):
                    return False
    return True


def check_oracle_agreement_float64():
    for n in (4, 8, 16, 32):
        a = gen.gen_deltanet(n, seed=n)
        truth = metrics.reference_inverse(a)
        outs = [
            algos.vcs_invert(a, F64),
            algos.mcs_invert(a, F64),
            algos.mch_invert(a, F64),
            algos.mbh_invert(a, F64),
            algos.mxr_invert(a, F64, b0=min(16, n), r=0),
            algos.ns_invert(a, F64, m=max(1, n.bit_length() - 1))[0],
        ]
        if any(_frel(truth, x) > 1e-12 for x in outs):
            return False
    return True


def check_matmul_budgets():
    n = 32
    a = gen.gen_deltanet(n, seed=5)
    budgets = []
    with matmul_tally() as t:
        algos.vcs_invert(a, F64)
    budgets.append(t.count == 0)
    with matmul_tally() as t:
        algos.mcs_invert(a, F64)
    budgets.append(t.count == n - 1)
    with matmul_tally() as t:
        algos.mch_invert(a, F64)
    budgets.append(t.count == 2 * 4)  # 2 log2(n/2)
    with matmul_tally() as t:
        algos.mbh_invert(a, F64, b0=1)
    budgets.append(t.count == 2 * 5)  # 2 log2(n/b0)
    with matmul_tally() as t:
        _, trace = algos.ns_invert(a, F64, m=7)
    budgets.append(t.count == 14 and trace.matmuls == 14)
    with matmul_tally() as t:
        algos.ir_refine(TriMatrix.identity(n), a, F64)
    budgets.append(t.count == 2)
    with matmul_tally() as t:
        algos.mxr_invert(a, F64, b0=8, r=1)
    budgets.append(t.count == 2 * 2 + 2 + 2 * 2)
    return all(budgets)


def _recursive_block_inverse(a: np.ndarray) -> np.ndarray:
    """Direct two-block recursion, same emulated products, for cross-checking."""
    n = a.shape[0]
    if n == 1:
        return np.array([[1.0]])
    h = n // 2
    inv11 = _recursive_block_inverse(a[:h, :h])
    inv22 = _recursive_block_inverse(a[h:, h:])
    t = fp_matmul(inv22, a[h:, :h], F64)
    b21 = -fp_matmul(t, inv11, F64)
    out = np.zeros((n, n))
    out[:h, :h] = inv11
    out[h:, h:] = inv22
    out[h:, :h] = b21
    return out


def check_structural_equivalences():
    for n in (2, 4, 8):
        a = gen.gen_deltanet(n, seed=n + 1)
        if not np.array_equal(algos.mbh_invert(a, F64).data, _recursive_block_inverse(a.data)):
            return False
    a16 = quantize(gen.gen_deltanet(16, seed=9), FLOAT32)
    pol = default_policy(FLOAT32)
    if not np.array_equal(algos.mxr_invert(a16, pol, b0=16, r=0).data,
                          algos.mch_invert(a16, pol).data):
        return False
    return True


def check_ns_nilpotent_termination():
    for n, seed in ((8, 0), (32, 1), (64, 2)):
        a = gen.gen_deltanet(n, seed=seed, key_corr=0.3)
        m = (n - 1).bit_length()
        x, trace = algos.ns_invert(a, F64, m=m)
        truth = metrics.reference_inverse(a)
        if trace.residuals[-1] > 1e-10 * float(np.linalg.norm(truth.data)):
            return False
        res = trace.residuals
        if any(res[k + 1] > res[k] ** 2 + 1e-10 for k in range(len(res) - 1)):
            return False
    return True


def check_refinement_contracts():
    a = TriMatrix.wrap(np.array([[1.0, 0.0], [0.7, 1.0]]))
    one = algos.ir_refine(TriMatrix.identity(2), a, F64)
    if not np.array_equal(one.data, np.array([[1.0, 0.0], [-0.7, 1.0]])):
        return False
    a = gen.gen_deltanet(32, seed=4)
    y = algos.mxr_invert(a, F64, b0=16, r=0)
    truth = metrics.reference_inverse(a)
    return _frel(truth, algos.ir_refine(y, a, F64)) <= _frel(truth, y) + 1e-15


def check_low_precision_phenomena():
    pol16 = default_policy(FLOAT16)
    polb = default_policy(BFLOAT16)
    worst = quantize(gen.gen_allones_worstcase(64, -1), FLOAT16)
    if np.all(np.isfinite(algos.mch_invert(worst, pol16).data)):
        return False
    hot = gen.gen_deltanet(32, seed=0, key_corr=harness.HARD_KEY_CORR)
    rep16 = metrics.error_report(metrics.reference_inverse(quantize(hot, FLOAT16)),
                                 algos.mch_invert(quantize(hot, FLOAT16), pol16))
    repb = metrics.error_report(metrics.reference_inverse(quantize(hot, BFLOAT16)),
                                algos.mch_invert(quantize(hot, BFLOAT16), polb))
    return rep16.nonfinite_count > 0 and repb.nonfinite_count == 0


def check_sweep_determinism():
    spec = harness.ExperimentSpec(sizes=(16,), formats=("fp16", "fp32"),
                                  methods=("VCS", "MCH", "NS-6"), trials=2, seed=7)
    a = harness.run_sweep(spec).to_csv()
    b = harness.run_sweep(spec).to_csv()
    return a == b and a.count("\n") == 2 + 2 * 1 * 2 * 3 + 1 * 2 * 3


def check_decay_identity():
    gammas_one = harness.run_decay_sweep(gammas=(1.0,), sizes=(16,), formats=("fp32",),
                                         methods=("VCS", "MXR(r=0)"), trials=2, seed=3)
    plain = harness.run_sweep(harness.ExperimentSpec(
        generator=harness.GeneratorSpec.make("decay", gamma=1.0, corr=harness.HARD_KEY_CORR),
        sizes=(16,), formats=("fp32",), methods=("VCS", "MXR(r=0)"), trials=2, seed=3))
    return gammas_one.to_csv() == plain.to_csv()


CHECKS = [
    ("rounding matches native fp16/fp32 casts", check_rounding_matches_native_casts),
    ("rounding is monotone, idempotent, within u", check_rounding_monotone_idempotent),
    ("fp16 overflows where bf16 does not", check_exponent_range_asymmetry),
    ("fp64 matmul equals host loop bitwise", check_matmul_against_host_loop),
    ("diagonal block parity partition", check_block_parity_partition),
    ("unit-key family is well conditioned", check_wellconditioned_family),
    ("random triangular family is not", check_random_triangular_contrast),
    ("repeated squaring reproduces binomials", check_binomial_growth_witness),
    ("all methods agree with the float64 oracle", check_oracle_agreement_float64),
    ("matmul budgets match the ledger", check_matmul_budgets),
    ("block recursion equals direct recursion", check_structural_equivalences),
    ("Newton-Schulz nilpotent termination", check_ns_nilpotent_termination),
    ("refinement step contracts", check_refinement_contracts),
    ("half-precision blow-up phenomena", check_low_precision_phenomena),
    ("sweeps are byte-deterministic", check_sweep_determinism),
    ("decay at gamma=1 equals plain sweep", check_decay_identity),
]


def run_all(verbose: bool = True) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn())
        except Exception as exc:  # a crash is a failure, not an abort
            passed = False
            if verbose:
                print(f"FAIL {name}: {type(exc).__name__}: {exc}")
                ok = False
                continue
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}")
    return ok
