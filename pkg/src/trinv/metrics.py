"""Ground-truth inverse, forward-error metrics and conditioning checks.

The reference inverse is plain float64 forward substitution, column by
column; for unit-lower triangular input that scheme is numerically stable
and structure-exact, which is all the error reports need. Error fields
follow the three standard forward errors (max absolute, max relative over
the lower triangle, Frobenius relative) plus the float64 residual norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UNIT_LOWER, TriMatrix
from .fpsim import matmul_f64

__all__ = [
    "ErrorReport",
    "reference_inverse",
    "error_report",
    "condition_number",
    "inverse_entry_bound_check",
]

# entries of the truth below this magnitude are incidental zeros, not
# meaningful denominators for a relative error
TINY_TRUTH = 1e-300

CSV_FIELDS = ("method", "n", "format", "seed",
              "max_abs", "max_rel", "frob_rel", "residual", "nonfinite")


def reference_inverse(a: TriMatrix) -> TriMatrix:
    """Float64 forward substitution on all unit basis columns at once."""
    if a.kind != UNIT_LOWER:
        raise ValueError("reference_inverse expects a unit_lower matrix")
    n = a.n
    aw = a.data
    x = np.eye(n)
    for k in range(n - 1):
        x[k+1:, :] -= aw[k+1:, k:k+1] * x[k:k+1, :]
    return TriMatrix(x, UNIT_LOWER)


@dataclass(frozen=True)
class ErrorReport:
    """Forward errors of one (truth, approximation) pair.

    Any non-finite entry in the approximation turns every error field into
    NaN and is tallied in nonfinite_count; tiny_truth_skipped counts lower
    triangle entries excluded from max_rel because the truth there is an
    incidental zero.
    """

    max_abs: float
    max_rel: float
    frob_rel: float
    residual_frob: float
    nonfinite_count: int
    tiny_truth_skipped: int = 0

    def csv_fields(self, method: str, n: int, fmt: str, seed) -> list:
        return [method, n, fmt, seed,
                self.max_abs, self.max_rel, self.frob_rel,
                self.residual_frob, self.nonfinite_count]


def error_report(truth: TriMatrix, approx: TriMatrix, a: TriMatrix | None = None) -> ErrorReport:
    """Compare an approximate inverse against the float64 truth.

    max_rel ranges over the lower triangle only (the strict upper triangle
    of the truth is exactly zero by structure). The residual norm
    ||I - approx @ A||_F is computed in float64 when A is supplied, with a
    fixed summation order so results are host-independent.
    """
    if truth.n != approx.n:
        raise ValueError(f"shape mismatch: {truth.n} vs {approx.n}")
    t = truth.data
    x = approx.data
    n = truth.n
    nonfinite = int(np.count_nonzero(~np.isfinite(x)))
    tril = np.tril_indices(n)
    denom_ok = np.abs(t[tril]) >= TINY_TRUTH
    skipped = int(np.count_nonzero(~denom_ok))
    if nonfinite:
        nan = float("nan")
        return ErrorReport(nan, nan, nan, nan, nonfinite, skipped)
    diff = t - x
    max_abs = float(np.max(np.abs(diff)))
    rel = np.abs(diff[tril])[denom_ok] / np.abs(t[tril])[denom_ok]
    max_rel = float(np.max(rel)) if rel.size else 0.0
    frob_rel = float(np.sqrt(np.sum(diff * diff)) / np.sqrt(np.sum(t * t)))
    residual = float("nan")
    if a is not None:
        r = np.eye(n) - matmul_f64(x, a.data)
        residual = float(np.sqrt(np.sum(r * r)))
    return ErrorReport(max_abs, max_rel, frob_rel, residual, 0, skipped)


def condition_number(a: TriMatrix | np.ndarray) -> float:
    """Spectral-norm condition number from float64 singular values."""
    arr = a.data if isinstance(a, TriMatrix) else np.asarray(a, dtype=np.float64)
    s = np.linalg.svd(arr, compute_uv=False)
    if s[-1] == 0.0 or not np.all(np.isfinite(s)):
        raise ValueError("matrix is numerically singular")
    return float(s[0] / s[-1])


def inverse_entry_bound_check(a: TriMatrix, tol: float = 1e-9) -> bool:
    """True iff every float64 inverse entry lies in [-1 - tol, 1 + tol].

    Holds for every Gram-of-unit-keys matrix (the well-conditioned family);
    fails on the adversarial all-ones construction, whose inverse entries
    reach 2**(i-j-1).
    """
    inv = reference_inverse(a)
    return bool(np.max(np.abs(inv.data)) <= 1.0 + tol)
