"""
Seven ways to invert a unit triangular matrix
=============================================

The matmul-rich inversion routines side by side on one chunk matrix: the
two column sweeps (VCS, MCS), repeated squaring (MCH), the unrolled block
recursion (MBH), the mixed scheme (MXR) with and without refinement, and
Newton-Schulz (NS). Costs are counted in emulated matrix products; errors
are measured against the float64 forward-substitution reference.
"""

import numpy as np

from trinv import (
    TriMatrix,
    default_policy,
    error_report,
    gen_deltanet,
    ir_refine,
    matmul_tally,
    mbh_invert,
    mch_invert,
    mcs_invert,
    mxr_invert,
    ns_invert,
    quantize,
    reference_inverse,
    vcs_invert,
)

N = 64
BASE = gen_deltanet(N, seed=7, key_corr=0.88)
DAMPED = TriMatrix.wrap(0.25 * np.eye(N))  # keeps the NS transient in fp16 range

print(f"one {N}x{N} chunk matrix, correlated keys; errors vs float64 reference\n")
print(f"{'method':<14} {'matmuls':>7}   {'fp32 frob_rel':>13}   {'fp16 frob_rel':>13}")

recipes = [
    ("VCS", lambda a, p: vcs_invert(a, p)),
    ("MCS", lambda a, p: mcs_invert(a, p)),
    ("MCH", lambda a, p: mch_invert(a, p)),
    ("MBH", lambda a, p: mbh_invert(a, p, b0=1)),
    ("MXR(r=0)", lambda a, p: mxr_invert(a, p, b0=16, r=0)),
    ("MXR(r=1)", lambda a, p: mxr_invert(a, p, b0=16, r=1)),
    ("NS-12", lambda a, p: ns_invert(a, p, m=12, x0=DAMPED)[0]),
    ("MXR(r=0)+IR", lambda a, p: ir_refine(mxr_invert(a, p, b0=16, r=0), a, p)),
]

for name, run in recipes:
    cells = {}
    for fmt in ("fp32", "fp16"):
        pol = default_policy(fmt)
        aq = quantize(BASE, fmt)
        truth = reference_inverse(aq)
        with matmul_tally() as tally:
            out = run(aq, pol)
        rep = error_report(truth, out, a=aq)
        cells[fmt] = rep.frob_rel if rep.nonfinite_count == 0 else float("nan")
        count = tally.count
    flag = "   <- NaN in fp16" if np.isnan(cells["fp16"]) else ""
    print(f"{name:<14} {count:>7}   {cells['fp32']:>13.3e}   {cells['fp16']:>13.3e}{flag}")

print()
print("NS here uses the damped start X0 = I/4; with X0 = I the iteration is")
print("exact in ceil(log2 n) steps but its transient can overflow half precision.")
