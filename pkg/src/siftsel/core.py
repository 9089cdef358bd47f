"""Kernel algebra over embedding rows.

Everything downstream reduces to the inner-product kernel k(x, y) = xᵀy and
the regularized conditional (posterior) variance of a query vector given a
multiset of observed rows:

    sigma²_X(q) = k(q,q) − k_X(q)ᵀ (K_X + λ′ I)⁻¹ k_X(q)

where K_X is the Gram matrix of the observed rows and λ′ > 0 plays the role
of observation noise. This module provides that quantity in both its kernel
form and its equivalent feature-space form, the rank-one conditional-kernel
downdate used by the incremental selectors, row normalization, and total
variation distance. All arithmetic is 64-bit regardless of on-disk storage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NotAProbabilityVector,
    NumericalFailure,
    ZeroNormRow,
)

# Negative variances within this band are round-off and clamped to zero;
# anything more negative is treated as a logic error (NumericalFailure).
NEGATIVE_VARIANCE_TOL = 1e-9

_ZERO_NORM_CUTOFF = 1e-12


@dataclass(frozen=True)
class EmbeddingSet:
    """An immutable id-tagged matrix of row embeddings.

    data is (n, d) float64, one embedding per row. ids, when present, has
    exactly n entries. source_rows records the original row index of each
    row when the set is a subset of a larger space (None means identity).
    """

    data: np.ndarray
    ids: tuple[str, ...] | None = None
    normalized: bool = False
    source_rows: tuple[int, ...] | None = None

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise DimensionMismatch(f"embedding data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("embedding data contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != data.shape[0]:
                raise DimensionMismatch(
                    f"{len(ids)} ids for {data.shape[0]} rows"
                )
            object.__setattr__(self, "ids", ids)
        if self.source_rows is not None:
            src = tuple(int(i) for i in self.source_rows)
            if len(src) != data.shape[0]:
                raise DimensionMismatch(
                    f"{len(src)} source rows for {data.shape[0]} rows"
                )
            object.__setattr__(self, "source_rows", src)
        if self.normalized and data.shape[0] > 0:
            norms = np.linalg.norm(data, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("normalized flag set but some row norm deviates from 1")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def id_of(self, row: int) -> str:
        """The string id of a row, defaulting to its decimal index."""
        if self.ids is not None:
            return self.ids[row]
        return str(row)


@dataclass(frozen=True)
class KernelConfig:
    """Regularizer and numeric policy shared by all kernel computations.

    lambda_prime is the observation-noise regularizer λ′ added to Gram
    diagonals; jitter is the first diagonal bump tried when a plain SPD
    solve fails, before escalating further.
    """

    lambda_prime: float = 0.01
    jitter: float = 1e-10
    normalize_inputs: bool = True

    def __post_init__(self):
        if not self.lambda_prime > 0:
            raise ValueError(f"lambda_prime must be positive, got {self.lambda_prime}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be non-negative, got {self.jitter}")


def as_query(q, dim: int | None = None) -> np.ndarray:
    """Validate and convert a query embedding to a 1-D float64 vector."""
    vec = np.asarray(q, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(vec)):
        raise ValueError("query contains non-finite values")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatch(f"query has dimension {vec.shape[0]}, expected {dim}")
    return vec


def _as_row_matrix(selected, dim: int) -> np.ndarray:
    """Stack a (possibly empty) sequence of row vectors into an (m, d) matrix."""
    if isinstance(selected, np.ndarray) and selected.ndim == 2:
        mat = np.asarray(selected, dtype=np.float64)
    else:
        rows = [np.asarray(r, dtype=np.float64).reshape(-1) for r in selected]
        if not rows:
            return np.empty((0, dim), dtype=np.float64)
        mat = np.vstack(rows)
    if mat.shape[1] != dim:
        raise DimensionMismatch(
            f"selected rows have dimension {mat.shape[1]}, query has {dim}"
        )
    return mat


def spd_solve(mat: np.ndarray, rhs: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """Solve the symmetric positive-definite system mat @ x = rhs.

    Plain Cholesky first; on failure the diagonal is bumped by `jitter`,
    then 1e-8, then 1e-6 before giving up with NumericalFailure. The
    escalation rescues Grams made singular by duplicated rows when the
    caller's regularizer is tiny, while the unperturbed first attempt
    keeps well-posed solves bias-free.
    """
    mat = np.asarray(mat, dtype=np.float64)
    ladder = [0.0]
    for j in (jitter, 1e-8, 1e-6):
        if j > ladder[-1]:
            ladder.append(j)
    eye = np.eye(mat.shape[0])
    for j in ladder:
        try:
            c, low = scipy.linalg.cho_factor(mat + j * eye, lower=True, check_finite=False)
            return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
        except scipy.linalg.LinAlgError:
            continue
    raise NumericalFailure(
        f"SPD solve failed after jitter escalation to 1e-6 (size {mat.shape[0]})"
    )


def _clamp_variance(value: float, context: str) -> float:
    """Clamp round-off negatives to 0; raise on negatives beyond tolerance."""
    if value < -NEGATIVE_VARIANCE_TOL:
        raise NumericalFailure(f"{context} is negative beyond round-off: {value!r}")
    return max(value, 0.0)


def normalize_rows(e: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm, preserving ids.

    Raises ZeroNormRow for any row with norm below 1e-12 — a silent drop
    would hide upstream embedding bugs.
    """
    norms = np.linalg.norm(e.data, axis=1)
    bad = np.flatnonzero(norms < _ZERO_NORM_CUTOFF)
    if bad.size:
        raise ZeroNormRow(int(bad[0]))
    return replace(e, data=e.data / norms[:, None], normalized=True)


def posterior_variance(selected, q, cfg: KernelConfig) -> float:
    """Conditional variance of the query after observing the selected rows.

    sigma²_X(q) = k(q,q) − k_X(q)ᵀ (K_X + λ′ I_m)⁻¹ k_X(q), with the
    empty selection returning k(q,q). Repeats in `selected` are meaningful:
    observing the same row twice reduces variance further, like repeated
    noisy measurements.
    """
    q = as_query(q)
    X = _as_row_matrix(selected, q.shape[0])
    kqq = float(q @ q)
    if X.shape[0] == 0:
        return _clamp_variance(kqq, "posterior variance")
    gram = X @ X.T
    gram[np.diag_indices_from(gram)] += cfg.lambda_prime
    kxq = X @ q
    sol = spd_solve(gram, kxq, cfg.jitter)
    return _clamp_variance(kqq - float(kxq @ sol), "posterior variance")


def posterior_variance_feature_space(selected, q, cfg: KernelConfig) -> float:
    """The same conditional variance computed in feature space.

    sigma²_X(q) = λ′ · qᵀ (Σ_X + λ′ I_d)⁻¹ q with Σ_X = Φ_XᵀΦ_X. Agrees
    with posterior_variance to ~1e-8 on well-conditioned inputs; useful when
    the selection is much larger than the embedding dimension.
    """
    q = as_query(q)
    X = _as_row_matrix(selected, q.shape[0])
    sigma = X.T @ X
    sigma[np.diag_indices_from(sigma)] += cfg.lambda_prime
    sol = spd_solve(sigma, q, cfg.jitter)
    return _clamp_variance(cfg.lambda_prime * float(q @ sol), "posterior variance")


def conditional_downdate(K: np.ndarray, pivot: int, lambda_prime: float) -> np.ndarray:
    """One conditioning step of the tracked conditional kernel matrix.

    Given the current conditional kernel k(.,.) over a tracked point set and
    a tracked pivot p just observed, every entry becomes

        k'(x, y) = k(x, y) − k(x, p) · k(p, y) / (k(p, p) + λ′).

    Returns a new symmetric matrix; diagonal round-off negatives are clamped
    to zero, negatives beyond −1e-9 raise NumericalFailure.
    """
    K = np.asarray(K, dtype=np.float64)
    col = K[:, pivot].copy()
    denom = K[pivot, pivot] + lambda_prime
    correction = np.multiply(col[:, None], col[None, :])
    correction /= denom
    out = K - correction
    d = np.diagonal(out).copy()
    if np.any(d < -NEGATIVE_VARIANCE_TOL):
        worst = float(d.min())
        raise NumericalFailure(f"conditional diagonal went negative beyond round-off: {worst!r}")
    np.fill_diagonal(out, np.maximum(d, 0.0, out=d))
    return out


def tv_distance(s, t) -> float:
    """Total variation distance ½ Σ|s_i − t_i| between probability vectors."""
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if s.shape != t.shape:
        raise DimensionMismatch(f"probability vectors of length {s.shape[0]} vs {t.shape[0]}")
    for name, v in (("first", s), ("second", t)):
        if np.any(v < 0) or abs(float(v.sum()) - 1.0) > 1e-6:
            raise NotAProbabilityVector(f"{name} argument is not a probability vector")
    return 0.5 * float(np.abs(s - t).sum())
