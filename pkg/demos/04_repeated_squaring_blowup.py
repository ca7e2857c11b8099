"""
Why repeated squaring blows up
==============================

The fast Neumann-series inverse squares the strict part over and over.
On the adversarial all-ones matrix the k-th power has entries equal to
binomial coefficients, and the middle power reaches binom(n-2, n/2-1),
roughly 2^n / sqrt(n): catastrophic in any format with a small exponent
range. This script watches the growth, triggers the half-precision NaN,
shows bfloat16 surviving with garbage digits, and evaluates the a-priori
bound that tells you when the method can be trusted at all.
"""

import numpy as np

from trinv import (
    FLOAT16,
    FLOAT32,
    default_policy,
    error_report,
    fp_matmul,
    gen_allones_worstcase,
    gen_deltanet,
    mch_error_bound,
    mch_invert,
    quantize,
    reference_inverse,
    strict_power_entry,
)
from trinv.fpsim import PrecisionPolicy, FLOAT64

F64 = PrecisionPolicy(FLOAT64, FLOAT64)

n = 32
print(f"powers of the all-ones strict-lower matrix, n={n}:")
l = np.tril(np.ones((n, n)), -1)
y, power = l.copy(), 1
while power < n // 2:
    y = fp_matmul(y, y, F64)
    power *= 2
    corner = strict_power_entry(n, power, n, 1)
    print(f"  L^{power:<3} max entry = {np.max(y):.4g}  (closed form binom({n-2},{power-1}) = {corner})")

print()
for n in (16, 32, 64):
    worst = gen_allones_worstcase(n, -1)
    out16 = mch_invert(quantize(worst, FLOAT16), default_policy("fp16"))
    bad = int(np.count_nonzero(~np.isfinite(out16.data)))
    print(f"worst case n={n:>3}: repeated squaring in fp16 -> {bad} non-finite entries")

print()
print("on correlated-key chunk matrices the same mechanism bites from n=32 up:")
for n in (16, 32, 64):
    a = gen_deltanet(n, seed=0, key_corr=0.88)
    rep16 = error_report(reference_inverse(quantize(a, FLOAT16)),
                         mch_invert(quantize(a, FLOAT16), default_policy("fp16")))
    rep32 = error_report(reference_inverse(quantize(a, FLOAT32)),
                         mch_invert(quantize(a, FLOAT32), default_policy("fp32")))
    state = f"{rep16.nonfinite_count} non-finite" if rep16.nonfinite_count else f"error {rep16.frob_rel:.2e}"
    print(f"  n={n:>3}: fp16 {state:<18}  fp32 error {rep32.frob_rel:.2e}")

print()
print("a-priori bound (machine precision u it would take to trust the method):")
for n in (8, 16, 32):
    for u, label in ((2.0 ** -52, "fp64"), (2.0 ** -23, "fp32")):
        b = mch_error_bound(n, norm_l=1.0, u=u, mu_degree=1)
        print(f"  n={n:>3} u={label}: bound = {b:.3g}")
