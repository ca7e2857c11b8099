"""The seven inversion procedures for unit-lower triangular matrices.

Every routine takes the full unit-diagonal matrix A (not its strict part)
plus a PrecisionPolicy, runs the documented sequence of emulated
operations, and returns whatever came out - including Inf/NaN entries,
which are measured phenomena here, never exceptions.

Matmul budgets (square products of size n, counted by fpsim.matmul_tally):

    VCS   0                     vector ops only
    MCS   n - 1
    MCH   2 log2(n/2)
    MBH   2 log2(n/b0)
    MXR   2 log2(b0/2) + 2 r + 2 log2(n/b0)
    NS    2 m
    IR    2 per call
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import UNIT_LOWER, TriMatrix, classify_kind, diag_blocks
from .fpsim import (
    PrecisionPolicy,
    fp_add,
    fp_matmul,
    fp_mul,
    fp_sub,
    matmul_f64,
)

__all__ = [
    "AlgorithmConfig",
    "InversionTrace",
    "vcs_invert",
    "mcs_invert",
    "mch_invert",
    "mbh_invert",
    "mxr_invert",
    "ns_invert",
    "ir_refine",
    "mch_error_bound",
    "pad_pow2",
]


@dataclass(frozen=True)
class AlgorithmConfig:
    """One method pick for the harness: algorithm, policy and tuning knobs.

    x0_scale describes the starting guess for the iterative methods as
    x0_scale * I (1.0 is the plain identity). post_ir counts full-matrix
    refinement steps applied to the finished inverse.
    """

    method: str
    policy: PrecisionPolicy
    b0: int = 16
    r: int = 0
    m: int = 12
    x0_scale: float = 1.0
    post_ir: int = 0

    def __post_init__(self):
        if self.method not in ("VCS", "MCS", "MCH", "MBH", "MXR", "NS"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.b0 < 1 or (self.b0 & (self.b0 - 1)) != 0:
            raise ValueError("b0 must be a positive power of two")
        if self.m < 0 or self.r < 0 or self.post_ir < 0:
            raise ValueError("iteration counts must be >= 0")


@dataclass
class InversionTrace:
    """Step/matmul ledger of one inversion, with optional residual history."""

    matmuls: int = 0
    steps: int = 0
    residuals: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["step,residual_frob"]
        lines += [f"{k},{r!r}" for k, r in enumerate(self.residuals)]
        return "\n".join(lines) + "\n"


def _check_unit_lower(a: TriMatrix):
    if a.kind != UNIT_LOWER:
        raise ValueError("input must be a unit_lower TriMatrix")


def _pack(arr: np.ndarray) -> TriMatrix:
    # poisoned outputs lose their structural kind; return them as general
    return TriMatrix(arr, classify_kind(arr))


def _levels(n: int, b0: int) -> int:
    lv = 0
    while (b0 << lv) < n:
        lv += 1
    if b0 << lv != n:
        raise ValueError(f"n={n} must be b0={b0} times a power of two")
    return lv


# ---------------------------------------------------------------------------
# column sweeps
# ---------------------------------------------------------------------------

def vcs_invert(a: TriMatrix, policy: PrecisionPolicy) -> TriMatrix:
    """Vector column sweep: forward-eliminate all unit basis columns.

    Pure vector arithmetic, rounded in the storage format; column j of the
    result is finished after sweeping columns 0..j-1, and the sweep at
    step k touches only rows below k, so the unit diagonal stays exact.
    """
    _check_unit_lower(a)
    n = a.n
    st = policy.storage
    dt = st.native_dtype()
    with np.errstate(all="ignore"):
        if dt is not None:
            aw = a.data.astype(dt)
            x = np.eye(n, dtype=dt)
            for k in range(n - 1):
                x[k+1:, :] = x[k+1:, :] - aw[k+1:, k:k+1] * x[k:k+1, :]
            out = x.astype(np.float64)
        else:
            aw = a.data
            out = np.eye(n)
            for k in range(n - 1):
                p = fp_mul(aw[k+1:, k:k+1], out[k:k+1, :], st)
                out[k+1:, :] = fp_sub(out[k+1:, :], p, st)
    return _pack(out)


def mcs_invert(a: TriMatrix, policy: PrecisionPolicy) -> TriMatrix:
    """Matrix column sweep: the same elimination as n - 1 chained matmuls.

    Works on W = 2I - A, whose strict part below the diagonal holds the
    negated multipliers; factor k is M_k = I + W[k+1:, k] e_k^T. The last
    column has no sub-diagonal entries (its factor is the identity), hence
    n - 1 products, applied in sweep order: X <- M_k X for k = 0 .. n-2.
    """
    _check_unit_lower(a)
    n = a.n
    st = policy.storage
    w = fp_sub(2.0 * np.eye(n), a.data, st)  # exact: 2-1 on the diagonal, negation below
    x = np.eye(n)
    for k in range(n - 1):
        m = np.eye(n)
        m[k+1:, k] = w[k+1:, k]
        x = fp_matmul(m, x, policy)
    return _pack(x)


# ---------------------------------------------------------------------------
# repeated squaring
# ---------------------------------------------------------------------------

def _mch_core(a_arr: np.ndarray, policy: PrecisionPolicy, levels: int) -> np.ndarray:
    n = a_arr.shape[0]
    st = policy.storage
    eye = np.eye(n)
    l = fp_sub(a_arr, eye, st)  # exact for grid inputs
    x = fp_sub(eye, l, st)
    y = l
    for _ in range(levels):
        y = fp_matmul(y, y, policy)
        p = fp_matmul(x, y, policy)
        x = fp_add(x, p, st)
    return x


def mch_invert(a: TriMatrix, policy: PrecisionPolicy) -> TriMatrix:
    """Neumann-series inverse by repeated squaring: 2 log2(n/2) matmuls.

    X accumulates (I - L)(I + L^2)(I + L^4)... while Y squares up the
    powers of L. Fast, and unstable: intermediate entries grow like
    binomial coefficients, so low-precision runs may legitimately return
    Inf/NaN entries. n must be a power of two >= 2 (see pad_pow2).
    """
    _check_unit_lower(a)
    n = a.n
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"repeated squaring needs n a power of two >= 2, got {n}")
    return _pack(_mch_core(a.data, policy, _levels(n, 1) - 1))


def pad_pow2(a: TriMatrix) -> TriMatrix:
    """Embed A in the next power-of-two size, padding with an identity block.

    The padded inverse holds the original inverse in its leading block, so
    power-of-two-only algorithms apply to any size.
    """
    _check_unit_lower(a)
    n, m = a.n, 1
    while m < n:
        m *= 2
    if m == n:
        return a
    out = np.eye(m)
    out[:n, :n] = a.data
    return TriMatrix(out, a.kind)


# ---------------------------------------------------------------------------
# block recursion
# ---------------------------------------------------------------------------

def mbh_invert(a: TriMatrix, policy: PrecisionPolicy, b0: int = 1,
               x0: TriMatrix | None = None) -> TriMatrix:
    """Unrolled block recursion: 2 log2(n/b0) matmuls.

    Doubling pass: split X into even/odd b-blocks and update
    X <- D_e + D_o - D_o A D_e, which welds adjacent block inverses into
    inverses of the doubled blocks. The starting matrix must hold the
    inverses of A's b0 diagonal blocks; the identity default seeds exactly
    the 1x1 case (unit diagonal), so b0 > 1 requires an explicit x0.
    """
    _check_unit_lower(a)
    n = a.n
    if x0 is None and b0 != 1:
        raise ValueError("the identity start only seeds b0=1; pass x0 holding "
                         "the b0-block inverses (or use the mixed recursion)")
    levels = _levels(n, b0)
    st = policy.storage
    x = np.eye(n) if x0 is None else np.asarray(x0.data, dtype=np.float64)
    b = b0
    for _ in range(levels):
        xm = TriMatrix.wrap(x)
        de = diag_blocks(xm, b, "even").data
        do = diag_blocks(xm, b, "odd").data
        t = fp_matmul(do, a.data, policy)
        p = fp_matmul(t, de, policy)
        s = fp_add(de, do, st)  # disjoint supports: exact
        x = fp_sub(s, p, st)
        b *= 2
    return _pack(x)


def mxr_invert(a: TriMatrix, policy: PrecisionPolicy, b0: int = 16, r: int = 0) -> TriMatrix:
    """Mixed recursion: squaring on the diagonal blocks, block recursion above.

    Phase 1 runs the repeated-squaring inverse on all b0 diagonal blocks at
    once (block-diagonal products stay block-diagonal, so one batched pass
    equals per-block runs). Phase 2 applies r refinement steps against the
    block diagonal. Phase 3 finishes with the block recursion seeded by the
    refined block inverses. Roughly 2 log2(n) matmuls in total.
    """
    _check_unit_lower(a)
    n = a.n
    if b0 < 2 or (b0 & (b0 - 1)) != 0:
        raise ValueError("b0 must be a power of two >= 2")
    _levels(n, b0)
    d = diag_blocks(a, b0, "all")
    y = _pack(_mch_core(d.data, policy, _levels(b0, 1) - 1))
    for _ in range(r):
        y = ir_refine(y, d, policy)
    return mbh_invert(a, policy, b0=b0, x0=y)


# ---------------------------------------------------------------------------
# iterative methods
# ---------------------------------------------------------------------------

def _residual_fro(x: np.ndarray, a: np.ndarray) -> float:
    """||I - X A||_F in float64, summation order fixed for reproducibility."""
    r = np.eye(a.shape[0]) - matmul_f64(x, a)
    return float(np.sqrt(np.sum(r * r)))


def ns_invert(a: TriMatrix, policy: PrecisionPolicy, m: int,
              x0: TriMatrix | None = None) -> tuple[TriMatrix, InversionTrace]:
    """Newton-Schulz iteration X <- X (2I - A X): 2 matmuls per step.

    Starting from X0 = I the residual I - X A is strictly lower triangular,
    so it nilpotently squares to zero within ceil(log2 n) steps; a scaled
    start c*I (residual spectral radius 1 - c) damps the transient growth
    that the plain start inherits on hard inputs. Residual history is
    recorded in float64 alongside the emulated iteration.
    """
    _check_unit_lower(a)
    if m < 0:
        raise ValueError("iteration count must be >= 0")
    n = a.n
    st = policy.storage
    x = np.eye(n) if x0 is None else np.asarray(x0.data, dtype=np.float64)
    trace = InversionTrace()
    trace.residuals.append(_residual_fro(x, a.data))
    for _ in range(m):
        y = fp_matmul(a.data, x, policy)
        p = fp_matmul(x, y, policy)
        two_x = fp_mul(x, np.float64(2.0), st)  # exact below overflow
        x = fp_sub(two_x, p, st)
        trace.matmuls += 2
        trace.steps += 1
        trace.residuals.append(_residual_fro(x, a.data))
    return _pack(x), trace


def ir_refine(y: TriMatrix, a: TriMatrix, policy: PrecisionPolicy) -> TriMatrix:
    """One refinement step Y + (I - Y A) Y: two matmuls.

    Contracts the residual quadratically while it is below one; cheap
    enough to bolt onto any approximate inverse.
    """
    if y.n != a.n:
        raise ValueError(f"shape mismatch: {y.n} vs {a.n}")
    st = policy.storage
    t = fp_matmul(y.data, a.data, policy)
    r = fp_sub(np.eye(a.n), t, st)
    p = fp_matmul(r, y.data, policy)
    return _pack(fp_add(y.data, p, st))


# ---------------------------------------------------------------------------
# a-priori error bound for repeated squaring
# ---------------------------------------------------------------------------

def mch_error_bound(n: int, norm_l: float, u: float, mu_degree: int = 2) -> float:
    """Worst-case forward-error bound for the repeated-squaring inverse.

    Evaluates the closed-form bound built from the growth products
    psi(k, c, d) = prod_{i=1..k} (1 + (c*||L||)^(2^(i+d))); the polynomial
    prefactors are n**mu_degree. Requires u <= 1 / (2^n * mu(n)); outside
    that regime the analysis does not apply and +inf is returned. The
    bound is astronomically loose by design - it is a diagnostic for WHEN
    repeated squaring can be trusted, not a sharp estimate.
    """
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError("bound needs n a power of two >= 2")
    if norm_l < 0 or u <= 0:
        raise ValueError("norm_l must be >= 0 and u > 0")
    mu = float(n) ** mu_degree
    with np.errstate(over="ignore"):
        threshold = 1.0 / (2.0 ** n * mu) if n < 1024 else 0.0
        if u > threshold:
            return float("inf")

        def psi(k: int, c: float, d: int) -> float:
            out = 1.0
            for i in range(1, k + 1):
                out *= 1.0 + (c * norm_l) ** (2 ** (i + d))
            return out

        def phi(k: int) -> float:
            lead = psi(k, 1.0, 0) * (2.0 * norm_l) ** (2 ** k)
            tail = (1.0 + norm_l) * 2.0 ** (2 ** k) * psi(k, 2.0, 1) \
                * (1.0 + (2.0 * norm_l) ** (2 ** (k + 1)))
            return lead + tail

        kmax = _levels(n, 1) - 1  # log2(n/2)
        total = phi(kmax)
        for j in range(1, kmax):
            total += phi(j) * psi(kmax, 2.0, 0) / psi(j, 2.0, 0)
        return float(mu * u * total)
