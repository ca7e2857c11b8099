"""Bit-faithful emulation of reduced-precision floating-point arithmetic.

Values are carried in host float64 and constrained to a target (t, p) grid
by explicit round-to-nearest-even after every scalar operation. All preset
grids are exact subsets of float64, so one rounding in double followed by
one rounding to the target equals a single correct rounding whenever the
target has t <= 23 fraction bits (and t = 52 is native double); emulation
is therefore exact for fp16, bf16, fp32 and fp64.

Matrix products follow the convention used throughout the experiments:
every multiply and every add is rounded to the accumulation format, the
k-sum runs left to right, and the finished entry is rounded once more to
the storage format. Overflow produces +/-inf and propagates IEEE-style;
non-finite results are values, never errors.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

import numpy as np

from .core import TriMatrix

__all__ = [
    "FloatFormat",
    "PrecisionPolicy",
    "FLOAT16",
    "BFLOAT16",
    "FLOAT32",
    "FLOAT64",
    "FORMATS",
    "get_format",
    "default_policy",
    "round_to_format",
    "quantize",
    "emulated_matmul",
    "emulated_add",
    "fp_add",
    "fp_sub",
    "fp_mul",
    "fp_matmul",
    "matmul_f64",
    "matmul_tally",
]


@dataclass(frozen=True)
class FloatFormat:
    """A binary floating-point grid: t fraction bits, p exponent bits.

    Machine precision is u = 2**-t. Exponents follow the IEEE layout: bias
    2**(p-1) - 1, normal exponents in [1 - bias, bias], gradual underflow
    below, and magnitudes past max_finite overflow to infinity.
    """

    name: str
    t: int
    p: int

    def __post_init__(self):
        if self.t < 1 or self.t > 52:
            raise ValueError("fraction bits must be in [1, 52]")
        if self.p < 2 or self.p > 11:
            raise ValueError("exponent bits must be in [2, 11]")

    @property
    def u(self) -> float:
        return 2.0 ** (-self.t)

    @property
    def bias(self) -> int:
        return 2 ** (self.p - 1) - 1

    @property
    def emax(self) -> int:
        return self.bias

    @property
    def emin(self) -> int:
        return 1 - self.bias

    @property
    def max_finite(self) -> float:
        return (2.0 - 2.0 ** (-self.t)) * 2.0 ** self.emax

    @property
    def smallest_subnormal(self) -> float:
        return 2.0 ** (self.emin - self.t)

    def native_dtype(self):
        """numpy dtype with identical arithmetic, or None (bf16 has none)."""
        return _NATIVE.get((self.t, self.p))

    def __str__(self):
        return self.name


FLOAT16 = FloatFormat("fp16", t=10, p=5)
BFLOAT16 = FloatFormat("bf16", t=7, p=8)
FLOAT32 = FloatFormat("fp32", t=23, p=8)
FLOAT64 = FloatFormat("fp64", t=52, p=11)

FORMATS = {
    "fp16": FLOAT16,
    "bf16": BFLOAT16,
    "fp32": FLOAT32,
    "fp64": FLOAT64,
    "float16": FLOAT16,
    "bfloat16": BFLOAT16,
    "float32": FLOAT32,
    "float64": FLOAT64,
}

_NATIVE = {(10, 5): np.float16, (23, 8): np.float32, (52, 11): np.float64}


def get_format(fmt: FloatFormat | str) -> FloatFormat:
    if isinstance(fmt, FloatFormat):
        return fmt
    try:
        return FORMATS[fmt.lower()]
    except KeyError:
        raise ValueError(f"unknown float format {fmt!r} (known: fp16, bf16, fp32, fp64)") from None


@dataclass(frozen=True)
class PrecisionPolicy:
    """Storage grid for matrices at rest + accumulation grid for matmuls."""

    storage: FloatFormat
    accumulate: FloatFormat

    def __post_init__(self):
        if self.accumulate.t < self.storage.t:
            raise ValueError("accumulation format must not be coarser than storage")

    def __str__(self):
        return f"{self.storage.name}/{self.accumulate.name}"


def default_policy(fmt: FloatFormat | str) -> PrecisionPolicy:
    """Store in the input format, accumulate matmuls in float32.

    fp64 storage gets fp64 accumulation (accumulation never coarser than
    storage); everything else follows the products-in-float32 convention.
    """
    f = get_format(fmt)
    return PrecisionPolicy(f, FLOAT64 if f.t > FLOAT32.t else FLOAT32)


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

def _round_array(x: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    """Round float64 values to the fmt grid, ties to even, overflow to inf.

    The scaling by a power of two is exact, so np.rint sees the exact
    significand and performs the one true rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(all="ignore"):
        _, ef = np.frexp(x)
        e = np.maximum(ef - 1, fmt.emin)  # result exponent; clamp into the subnormal regime
        scaled = np.ldexp(x, fmt.t - e)
        r = np.ldexp(np.rint(scaled), e - fmt.t)
        r = np.where(np.abs(r) > fmt.max_finite, np.copysign(np.inf, x), r)
        r = np.where(np.isfinite(x), r, x)
        r = np.where(x == 0.0, x, r)  # keep signed zeros untouched by the junk exponent
    return r


def round_to_format(x, fmt: FloatFormat | str):
    """Nearest representable value in fmt (scalar or elementwise array)."""
    f = get_format(fmt)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(_round_array(np.asarray([x], dtype=np.float64), f)[0])
    return _round_array(x, f)


def quantize(m: TriMatrix, fmt: FloatFormat | str) -> TriMatrix:
    """Round every entry of a matrix to the fmt grid.

    Unit diagonals and exact zeros are fixed points of every preset grid,
    so the structural kind is preserved.
    """
    f = get_format(fmt)
    return TriMatrix(_round_array(m.data, f), m.kind)


# ---------------------------------------------------------------------------
# elementwise ops on the grid
# ---------------------------------------------------------------------------

def fp_add(a: np.ndarray, b: np.ndarray, fmt: FloatFormat | str) -> np.ndarray:
    """Elementwise fl(a + b) on the fmt grid."""
    return _round_array(np.asarray(a, np.float64) + np.asarray(b, np.float64), get_format(fmt))


def fp_sub(a: np.ndarray, b: np.ndarray, fmt: FloatFormat | str) -> np.ndarray:
    return _round_array(np.asarray(a, np.float64) - np.asarray(b, np.float64), get_format(fmt))


def fp_mul(a: np.ndarray, b: np.ndarray, fmt: FloatFormat | str) -> np.ndarray:
    return _round_array(np.asarray(a, np.float64) * np.asarray(b, np.float64), get_format(fmt))


# ---------------------------------------------------------------------------
# matrix product
# ---------------------------------------------------------------------------

_tally_stack: contextvars.ContextVar[tuple] = contextvars.ContextVar("trinv_matmul_tally", default=())


class MatmulTally:
    """Counter of emulated matrix products executed under a tally context."""

    def __init__(self):
        self.count = 0


@contextlib.contextmanager
def matmul_tally():
    """Count emulated matmuls executed inside the with-block."""
    tally = MatmulTally()
    token = _tally_stack.set(_tally_stack.get() + (tally,))
    try:
        yield tally
    finally:
        _tally_stack.reset(token)


def _bump_tally():
    for t in _tally_stack.get():
        t.count += 1


def _matmul_native(a: np.ndarray, b: np.ndarray, dtype) -> np.ndarray:
    an = a.astype(dtype)
    bn = b.astype(dtype)
    with np.errstate(all="ignore"):
        s = an[:, 0:1] * bn[0:1, :]
        for k in range(1, a.shape[1]):
            s = s + an[:, k:k+1] * bn[k:k+1, :]
    return s.astype(np.float64)


def _matmul_generic(a: np.ndarray, b: np.ndarray, acc: FloatFormat) -> np.ndarray:
    with np.errstate(all="ignore"):
        s = _round_array(a[:, 0:1] * b[0:1, :], acc)
        for k in range(1, a.shape[1]):
            p = _round_array(a[:, k:k+1] * b[k:k+1, :], acc)
            s = _round_array(s + p, acc)
    return s


def fp_matmul(a: np.ndarray, b: np.ndarray, policy: PrecisionPolicy) -> np.ndarray:
    """Emulated product of two arrays already on the storage grid.

    Every multiply and add is rounded to policy.accumulate, summing over k
    in index order; the result is rounded to policy.storage. Shapes may be
    rectangular. Rounding to a format with a native numpy dtype is done in
    that dtype (bit-identical to the generic path, just faster).
    """
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions do not agree: {a.shape} x {b.shape}")
    _bump_tally()
    dt = policy.accumulate.native_dtype()
    if dt is not None:
        s = _matmul_native(a, b, dt)
    else:
        s = _matmul_generic(a, b, policy.accumulate)
    return _round_array(s, policy.storage)


def matmul_f64(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fixed-order float64 product for diagnostics and generators.

    Same arithmetic as fp_matmul under the fp64/fp64 policy, but it does
    not count toward a matmul tally: truth computations and residual
    bookkeeping are not part of any emulated algorithm.
    """
    return _matmul_native(np.asarray(a, np.float64), np.asarray(b, np.float64), np.float64)


def emulated_matmul(a: TriMatrix, b: TriMatrix, policy: PrecisionPolicy) -> TriMatrix:
    """Emulated matrix product of two TriMatrix values (see fp_matmul)."""
    return TriMatrix.wrap(fp_matmul(a.data, b.data, policy))


def emulated_add(a: TriMatrix, b: TriMatrix, fmt: FloatFormat | str) -> TriMatrix:
    """Elementwise rounded sum of two equal-shape matrices."""
    if a.n != b.n:
        raise ValueError(f"shape mismatch: {a.n} vs {b.n}")
    return TriMatrix.wrap(fp_add(a.data, b.data, fmt))
