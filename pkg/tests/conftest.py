import numpy as np

from trinv import FLOAT64, PrecisionPolicy, fp_matmul

F64 = PrecisionPolicy(FLOAT64, FLOAT64)


def recursive_block_inverse(a: np.ndarray) -> np.ndarray:
    """Independent direct two-block recursion oracle.

    inv = [[A11^-1, 0], [-A22^-1 A21 A11^-1, A22^-1]], built by explicit
    recursion with the same emulated float64 products in the same
    association order as the unrolled production loop, so agreement with
    it must be bit-for-bit.
    """
    n = a.shape[0]
    if n == 1:
        return np.array([[1.0]])
    h = n // 2
    inv11 = recursive_block_inverse(a[:h, :h])
    inv22 = recursive_block_inverse(a[h:, h:])
    t = fp_matmul(inv22, a[h:, :h], F64)
    b21 = -fp_matmul(t, inv11, F64)
    out = np.zeros((n, n))
    out[:h, :h] = inv11
    out[h:, h:] = inv22
    out[h:, :h] = b21
    return out
