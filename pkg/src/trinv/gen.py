"""Generators for the matrix families used in the accuracy experiments.

All generators return unit-lower triangular matrices built in float64 from
a seeded, portable RNG (numpy default_rng), so published regression values
are reproducible. Two sign conventions coexist:

* gen_deltanet builds A = I + strict_tril(K K^T) from unit-norm key rows,
  the form used by the accuracy experiments; its inverse entries stay in
  [-1, 1] and its condition number is at most n**2.
* gen_with_phi builds A = I - strict_tril(phi(K, K^T)), the chunk-matrix
  sign convention, with phi selectable (plain Gram, beta-scaled Gram, or
  decay-scaled Gram).

Inversion never looks at the sign, so either family exercises the same
code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import STRICT_LOWER, UNIT_LOWER, TriMatrix, unit_lower_from_strict
from .fpsim import matmul_f64

__all__ = [
    "PhiKind",
    "ChunkSet",
    "unit_keys",
    "gen_deltanet",
    "gen_with_phi",
    "gen_gaussian_tril",
    "gen_allones_worstcase",
    "chunk_sequence",
    "strict_power_entry",
]


def _unit_rows(rng: np.random.Generator, n: int, d: int, key_corr: float) -> np.ndarray:
    """Key matrix with rows on the unit sphere of R^d.

    key_corr = 0 draws i.i.d. standard normal rows. key_corr = phi in (0, 1)
    runs a stationary AR(1) walk across rows before normalizing, so nearby
    keys correlate like phi**|i - j| - the shape real per-position keys
    have, and the knob that controls how hard repeated-squaring inversion
    gets stressed.
    """
    g = rng.standard_normal((n, d))
    if key_corr != 0.0:
        if not 0.0 < key_corr < 1.0:
            raise ValueError("key_corr must lie in [0, 1)")
        k = np.empty_like(g)
        k[0] = g[0]
        c = math.sqrt(1.0 - key_corr * key_corr)
        for i in range(1, n):
            k[i] = key_corr * k[i - 1] + c * g[i]
        g = k
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms


def _gram(k: np.ndarray) -> np.ndarray:
    # fixed-order emulated product keeps the Gram bit-reproducible across hosts
    return np.clip(matmul_f64(k, k.T), -1.0, 1.0)  # unit rows bound the true dot products by 1


def unit_keys(n: int, d: int | None = None, seed: int = 0, key_corr: float = 0.0) -> np.ndarray:
    """Seeded (n, d) key matrix with unit-norm rows; d defaults to n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = n if d is None else d
    if d < 1:
        raise ValueError("d must be >= 1")
    return _unit_rows(np.random.default_rng(seed), n, d, key_corr)


def _decay_mask(gamma, n: int) -> np.ndarray:
    g = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (n,))
    c = np.cumprod(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        mask = c[:, None] / c[None, :]
    return mask  # entry (i, j) = prod_{m=j+1..i} gamma_m for i > j


def gen_deltanet(n: int, d: int | None = None, seed: int = 0, key_corr: float = 0.0,
                 decay=None) -> TriMatrix:
    """A = I + strict_tril(K K^T) with unit-norm key rows K in R^{n x d}.

    d defaults to n. Entries lie in [-1, 1]; in exact arithmetic the
    inverse entries do too, and kappa_2(A) <= n**2. An optional decay
    factor (scalar or per-row vector in (0, 1]) applies the gated-decay
    mask to the strict part, shrinking off-diagonal magnitudes; decay=1 is
    bit-identical to no decay.
    """
    k = unit_keys(n, d, seed, key_corr)
    g = _gram(k)
    if decay is not None:
        gam = np.asarray(decay, dtype=np.float64)
        if np.any(gam <= 0.0) or np.any(gam > 1.0):
            raise ValueError("decay factors must lie in (0, 1]")
        g = g * _decay_mask(decay, n)
    l = TriMatrix(np.tril(g, -1), STRICT_LOWER)
    return unit_lower_from_strict(l)


@dataclass(frozen=True)
class PhiKind:
    """Selector for the similarity transform applied to K K^T.

    variant "plain_kkt" uses the Gram matrix as is; "deltanet_beta" scales
    row i by beta[i] (each in [0, 2)); "decay_scaled" multiplies entry
    (i, j) by prod_{m=j+1..i} gamma[m], the gated-decay mask (gamma scalar
    broadcasts to all rows).
    """

    variant: str
    beta: np.ndarray | None = None
    gamma: float | np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in ("plain_kkt", "deltanet_beta", "decay_scaled"):
            raise ValueError(f"unknown phi variant {self.variant!r}")
        if self.variant == "deltanet_beta":
            if self.beta is None:
                raise ValueError("deltanet_beta requires a beta vector")
            b = np.asarray(self.beta, dtype=np.float64)
            if np.any(b < 0.0) or np.any(b >= 2.0):
                raise ValueError("beta entries must lie in [0, 2)")
            object.__setattr__(self, "beta", b)
        if self.variant == "decay_scaled":
            if self.gamma is None:
                raise ValueError("decay_scaled requires gamma")
            g = np.asarray(self.gamma, dtype=np.float64)
            if np.any(g <= 0.0) or np.any(g > 1.0):
                raise ValueError("decay factors must lie in (0, 1]")
            object.__setattr__(self, "gamma", g)

    def sliced(self, lo: int, hi: int) -> "PhiKind":
        """Restrict per-position parameters to rows [lo, hi)."""
        beta = self.beta[lo:hi] if isinstance(self.beta, np.ndarray) else self.beta
        gamma = self.gamma
        if isinstance(gamma, np.ndarray) and gamma.ndim > 0:
            gamma = gamma[lo:hi]
        return PhiKind(self.variant, beta, gamma)


def gen_with_phi(k: np.ndarray, phi: PhiKind) -> TriMatrix:
    """Chunk matrix A = I - strict_tril(phi(K, K^T)) for one key block."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] < 1:
        raise ValueError("K must be a nonempty (n, d) array")
    n = k.shape[0]
    g = matmul_f64(k, k.T)
    if phi.variant == "deltanet_beta":
        if phi.beta.shape[0] != n:
            raise ValueError(f"beta has length {phi.beta.shape[0]}, expected {n}")
        g = phi.beta[:, None] * g
    elif phi.variant == "decay_scaled":
        gam = phi.gamma
        if isinstance(gam, np.ndarray) and gam.ndim > 0 and gam.shape[0] != n:
            raise ValueError(f"gamma has length {gam.shape[0]}, expected {n}")
        g = g * _decay_mask(gam, n)
    l = np.tril(g, -1)
    return TriMatrix(np.eye(n) - l, UNIT_LOWER)


def gen_gaussian_tril(n: int, seed: int = 0) -> TriMatrix:
    """A = I + strict_tril(G), G i.i.d. standard normal.

    The random-triangular family whose condition number grows exponentially
    with n; the ill-conditioned contrast to gen_deltanet.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    return unit_lower_from_strict(TriMatrix(np.tril(g, -1), STRICT_LOWER))


def gen_allones_worstcase(n: int, sign: int = -1) -> TriMatrix:
    """A = I + sign * (all-ones strictly lower matrix).

    sign=-1 is the adversarial matrix whose inverse entries grow like
    2**(i-j-1); repeated squaring of its strict part reproduces the
    binomial growth of strict_power_entry exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    l = sign * np.tril(np.ones((n, n)), -1)
    return unit_lower_from_strict(TriMatrix(l, STRICT_LOWER))


@dataclass(frozen=True)
class ChunkSet:
    """Per-chunk matrices for one sequence: ceil(L/C) blocks, last may be short."""

    chunks: list = field(default_factory=list)
    chunk_len: int = 0
    seq_len: int = 0

    def __post_init__(self):
        expect = -(-self.seq_len // self.chunk_len) if self.chunk_len else 0
        if len(self.chunks) != expect:
            raise ValueError(f"expected {expect} chunks for L={self.seq_len}, C={self.chunk_len}")


def chunk_sequence(k: np.ndarray, chunk_len: int, phi: PhiKind) -> ChunkSet:
    """Split the key rows into chunks of chunk_len and build each chunk matrix.

    Chunk j covers rows [j*C, min((j+1)*C, L)); per-position phi parameters
    are sliced along with the rows, so each chunk depends only on its own
    keys.
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] < 1:
        raise ValueError("K must be a nonempty (L, d) array")
    if chunk_len < 1:
        raise ValueError("chunk length must be >= 1")
    seq_len = k.shape[0]
    chunks = []
    for lo in range(0, seq_len, chunk_len):
        hi = min(lo + chunk_len, seq_len)
        chunks.append(gen_with_phi(k[lo:hi], phi.sliced(lo, hi)))
    return ChunkSet(chunks, chunk_len, seq_len)


def strict_power_entry(n: int, k: int, i: int, j: int) -> int:
    """Entry (i, j), 1-based, of the k-th power of the all-ones strict-lower matrix.

    Equals binom(i-j-1, k-1); zero once the chain length outruns the
    available gap. Exact integer arithmetic.
    """
    if not (1 <= j < i <= n):
        raise ValueError(f"indices need 1 <= j < i <= n, got i={i}, j={j}, n={n}")
    if k < 1:
        raise ValueError("power k must be >= 1")
    if i - j - 1 < k - 1:
        return 0
    return math.comb(i - j - 1, k - 1)
