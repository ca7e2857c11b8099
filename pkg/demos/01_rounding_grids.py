"""
Reduced-precision grids and what they do to arithmetic
======================================================

Every value in this library lives on an explicit floating-point grid.
This script walks the four preset grids, shows the rounding unit and the
overflow threshold of each, and demonstrates the two classic half-precision
phenomena: absorption of small addends, and the fp16/bf16 exponent-range
asymmetry.
"""

import numpy as np

from trinv import BFLOAT16, FLOAT16, FLOAT32, FLOAT64, fp_add, round_to_format

print("format   fraction_bits  u=2^-t      max_finite      tiniest_subnormal")
for fmt in (FLOAT16, BFLOAT16, FLOAT32, FLOAT64):
    print(f"{fmt.name:<8} {fmt.t:>12}  {fmt.u:<10.3g}  {fmt.max_finite:<14.7g}  "
          f"{fmt.smallest_subnormal:.3g}")

print()
print("rounding 1 + 2^-11 in fp16 (a tie) ->", round_to_format(1 + 2.0 ** -11, FLOAT16))
print("rounding 70000 in fp16  ->", round_to_format(7e4, FLOAT16))
print("rounding 70000 in bf16  ->", round_to_format(7e4, BFLOAT16))

# absorption: the fp16 grid near 1e4 has spacing 8, so adding 1 does nothing
print()
print("fp16: 10000 + 1 =", fp_add(np.array([1e4]), np.array([1.0]), FLOAT16)[0])
print("fp16: 10000 + 5 =", fp_add(np.array([1e4]), np.array([5.0]), FLOAT16)[0])

# accumulating many small terms: float32 accumulation rescues fp16 sums
terms = np.full(4096, np.float64(0.25))
seq16 = 0.0
for t in terms:
    seq16 = fp_add(np.array([seq16]), np.array([t]), FLOAT16)[0]
acc32 = 0.0
for t in terms:
    acc32 = fp_add(np.array([acc32]), np.array([t]), FLOAT32)[0]
print()
print(f"sum of 4096 x 0.25:  exact=1024  fp16-accumulated={seq16}  "
      f"fp32-accumulated={round_to_format(acc32, FLOAT16)}")
