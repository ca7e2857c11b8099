"""Dense matrix container and structural predicates.

Everything downstream works on square matrices that are unit-lower
triangular (ones on the diagonal, zeros strictly above) or strictly lower
triangular. Values are carried in host float64; reduced-precision grids are
enforced by the fpsim module, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GENERAL = "general"
STRICT_LOWER = "strict_lower"
UNIT_LOWER = "unit_lower"

KINDS = (GENERAL, STRICT_LOWER, UNIT_LOWER)


def classify_kind(a: np.ndarray) -> str:
    """Structural kind of a square array, by exact comparison.

    NaN/Inf anywhere in the diagonal or upper triangle demotes the matrix
    to "general": a poisoned result no longer has usable structure.
    """
    n = a.shape[0]
    upper = a[np.triu_indices(n, 1)]
    if upper.size == 0 or np.all(upper == 0.0):
        d = np.diagonal(a)
        if np.all(d == 1.0):
            return UNIT_LOWER
        if np.all(d == 0.0):
            return STRICT_LOWER
    return GENERAL


@dataclass(frozen=True)
class TriMatrix:
    """Immutable dense square matrix with a structural kind flag.

    data is row-major float64 and frozen after construction; operations
    return new instances. The kind flag is validated, never trusted.
    """

    data: np.ndarray
    kind: str = GENERAL

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64)  # defensive copy
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"TriMatrix requires a square 2-d array, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("TriMatrix requires n >= 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind != GENERAL and classify_kind(a) != self.kind:
            raise ValueError(f"data does not satisfy kind={self.kind!r}")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @staticmethod
    def wrap(a: np.ndarray) -> "TriMatrix":
        """Wrap an array, classifying its kind from the entries."""
        a = np.asarray(a, dtype=np.float64)
        return TriMatrix(a, classify_kind(a))

    @staticmethod
    def identity(n: int) -> "TriMatrix":
        return TriMatrix(np.eye(n), UNIT_LOWER)

    def __repr__(self):
        return f"TriMatrix(n={self.n}, kind={self.kind!r})"


@dataclass(frozen=True)
class BlockSpec:
    """Edge length of the square diagonal blocks used by block algorithms."""

    b: int

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("block size must be >= 1")


def strict_tril(m: TriMatrix) -> TriMatrix:
    """Keep entries strictly below the diagonal, zero elsewhere."""
    return TriMatrix(np.tril(m.data, -1), STRICT_LOWER)


def unit_lower_from_strict(l: TriMatrix) -> TriMatrix:
    """I + L for a strictly lower triangular L."""
    if l.kind != STRICT_LOWER and classify_kind(l.data) != STRICT_LOWER:
        raise ValueError("unit_lower_from_strict expects a strict_lower matrix")
    return TriMatrix(np.eye(l.n) + l.data, UNIT_LOWER)


def diag_blocks(m: TriMatrix, spec: BlockSpec | int, parity: str = "all") -> TriMatrix:
    """Keep the selected b x b diagonal blocks of m, zero elsewhere.

    Block index counts from 0; "even" keeps indices 0, 2, 4, ... and "odd"
    keeps 1, 3, 5, ...  Exactness contract: diag_blocks(m, b, "even") +
    diag_blocks(m, b, "odd") == diag_blocks(m, b, "all") entry for entry.
    """
    b = spec.b if isinstance(spec, BlockSpec) else int(spec)
    if b < 1:
        raise ValueError("block size must be >= 1")
    n = m.n
    if n % b != 0:
        raise ValueError(f"block size {b} does not divide n={n}")
    if parity not in ("even", "odd", "all"):
        raise ValueError(f"parity must be 'even', 'odd' or 'all', got {parity!r}")
    idx = np.arange(n) // b
    mask = idx[:, None] == idx[None, :]
    if parity == "even":
        mask &= (idx % 2 == 0)[:, None]
    elif parity == "odd":
        mask &= (idx % 2 == 1)[:, None]
    out = np.where(mask, m.data, 0.0)
    return TriMatrix.wrap(out)
