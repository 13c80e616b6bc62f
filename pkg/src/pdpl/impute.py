"""Missing-value imputation for score matrices.

Four methods fill the missing cells of an ``N x S`` matrix: column mean,
column median, k-nearest neighbours, and fuzzy k-means (FKM) clustering
whose distances use the partial distance strategy

    d(x, v) = (S / I) * sqrt(sum_j I_j * (x_j - v_j) ** 2)

where ``I_j`` flags observed fields of ``x`` and ``I`` counts them.

Inputs are either a :class:`DataMatrix` or any array-like with ``NaN``
marking missing cells; each function returns the same kind it was given.
Observed cells are always copied through untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ValidationError

METHODS = ("mean", "median", "knn", "fkm")


@dataclass(frozen=True)
class DataMatrix:
    """Values plus an explicit observed-mask (True = observed).

    Unobserved cells of ``values`` are normalised to NaN.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, ndmin=2)
        mask = np.array(self.mask, dtype=bool, ndmin=2)
        if values.ndim != 2 or values.shape != mask.shape:
            raise ValueError(f"values {values.shape} and mask {mask.shape} must be matrices of equal shape")
        if np.isnan(values[mask]).any():
            raise ValueError("cells marked observed contain NaN")
        values[~mask] = np.nan
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_array(cls, a) -> "DataMatrix":
        a = np.array(a, dtype=float, ndmin=2)
        return cls(a, ~np.isnan(a))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def n_missing(self) -> int:
        return int((~self.mask).sum())


def _coerce(X) -> Tuple[np.ndarray, np.ndarray, bool]:
    if isinstance(X, DataMatrix):
        return X.values, X.mask, True
    dm = DataMatrix.from_array(X)
    return dm.values, dm.mask, False


def _wrap(filled: np.ndarray, as_matrix: bool):
    if as_matrix:
        return DataMatrix(filled, np.ones(filled.shape, dtype=bool))
    return filled


def _check_columns(mask: np.ndarray) -> None:
    empty = np.flatnonzero(~mask.any(axis=0))
    if empty.size:
        raise ValidationError(f"column(s) {empty.tolist()} have no observed values")


def _check_rows(mask: np.ndarray) -> None:
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise ValidationError(f"row(s) {empty.tolist()} have no observed values")


def _fill_with_column_stat(X, stat):
    values, mask, as_matrix = _coerce(X)
    _check_columns(mask)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fill = stat(values, axis=0)
    return _wrap(np.where(mask, values, fill[None, :]), as_matrix)


def impute_mean(X):
    """Replace each missing cell by the mean of its column's observed cells."""
    return _fill_with_column_stat(X, np.nanmean)


def impute_median(X):
    """Replace each missing cell by its column median (mid-pair mean for even counts)."""
    return _fill_with_column_stat(X, np.nanmedian)


def partial_distance(x, v, mask=None) -> float:
    """Partial-distance between a possibly incomplete row ``x`` and a full vector ``v``.

    Reduces to the Euclidean distance when ``x`` is complete.

    >>> partial_distance([1.0, float("nan")], [0.0, 5.0])
    2.0
    """
    x = np.asarray(x, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if x.shape != v.shape:
        raise ValueError("x and v must have the same length")
    obs = ~np.isnan(x) if mask is None else np.asarray(mask, dtype=bool).ravel()
    n_obs = int(obs.sum())
    if n_obs == 0:
        raise ValidationError("row has no observed fields")
    diff = x[obs] - v[obs]
    return x.size / n_obs * float(np.sqrt(np.dot(diff, diff)))


def _partial_distance_matrix(values: np.ndarray, mask: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """``N x K`` partial distances of every row to every center."""
    S = values.shape[1]
    xz = np.where(mask, values, 0.0)
    diff = (xz[:, None, :] - centers[None, :, :]) * mask[:, None, :]
    counts = mask.sum(axis=1)
    return (S / counts)[:, None] * np.sqrt(np.einsum("iks,iks->ik", diff, diff))


def memberships(distances: np.ndarray, m: float = 2.0) -> np.ndarray:
    """Fuzzy memberships ``d_ik^(-2/(m-1)) / sum_c d_ic^(-2/(m-1))``.

    A row at zero distance from one or more centers splits its membership
    evenly across those centers (the limit of the formula).
    """
    D = np.asarray(distances, dtype=float)
    U = np.empty_like(D)
    zero = D == 0.0
    hit = zero.any(axis=1)
    if hit.any():
        U[hit] = zero[hit] / zero[hit].sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        # log domain keeps large exponents (m close to 1) from overflowing
        logw = (-2.0 / (m - 1.0)) * np.log(D[rest])
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        U[rest] = w / w.sum(axis=1, keepdims=True)
    return U


@dataclass(frozen=True)
class FkmParams:
    n_clusters: int = 3
    m: float = 2.0
    epsilon: float = 1e-6
    max_iter: int = 100
    seed: Optional[int] = 0

    def __post_init__(self):
        if int(self.n_clusters) != self.n_clusters or self.n_clusters < 1:
            raise ValidationError(f"n_clusters must be a positive integer, got {self.n_clusters}")
        if not self.m > 1:
            raise ValidationError(f"fuzzification m must exceed 1, got {self.m}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass(frozen=True)
class FkmModel:
    centers: np.ndarray
    memberships: np.ndarray
    iterations_run: int
    converged: bool
    initial_rows: Tuple[int, ...] = field(default=())


def _initial_centers(values, mask, K, rng) -> Tuple[np.ndarray, np.ndarray]:
    """``K`` rows in random order, skipping rows identical to one already taken.

    Identical starting centers would stay identical forever, so duplicates
    are only used when the data has fewer than ``K`` distinct rows.
    """
    col_mean = np.nanmean(values, axis=0)
    filled = np.where(mask, values, col_mean[None, :])
    order = rng.permutation(values.shape[0])
    picked: List[int] = []
    for r in order:
        if not any(np.array_equal(filled[r], filled[q]) for q in picked):
            picked.append(int(r))
            if len(picked) == K:
                break
    for r in order:
        if len(picked) == K:
            break
        if r not in picked:
            picked.append(int(r))
    rows = np.array(picked)
    return filled[rows].copy(), rows


def _update_centers(values, mask, U, previous) -> np.ndarray:
    xz = np.where(mask, values, 0.0)
    num = U.T @ xz
    den = U.T @ mask.astype(float)
    # a cluster with no membership mass on a column keeps its old coordinate
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), previous)


def fkm_cluster(X, params: Optional[FkmParams] = None) -> FkmModel:
    """Fuzzy k-means on incomplete data.

    Centers start at ``K`` distinct rows drawn with ``params.seed`` (their
    gaps filled with column means, duplicate rows skipped). Each pass
    computes partial distances, memberships and membership-weighted
    centers, the latter coordinate-wise over observed cells only.
    Iteration stops once the Frobenius norm of the center shift drops
    below ``epsilon`` or after ``max_iter`` passes.
    The returned memberships are evaluated at the final centers.
    """
    p = params or FkmParams()
    values, mask, _ = _coerce(X)
    N = values.shape[0]
    K = int(p.n_clusters)
    if K > N:
        raise ValidationError(f"n_clusters ({K}) exceeds number of rows ({N})")
    _check_rows(mask)
    _check_columns(mask)

    rng = np.random.default_rng(p.seed)
    V, rows = _initial_centers(values, mask, K, rng)
    converged = False
    iterations = 0
    for iterations in range(1, int(p.max_iter) + 1):
        U = memberships(_partial_distance_matrix(values, mask, V), p.m)
        V_new = _update_centers(values, mask, U, V)
        shift = float(np.linalg.norm(V_new - V))
        V = V_new
        if not np.isfinite(shift):
            break
        if shift < p.epsilon:
            converged = True
            break
    U = memberships(_partial_distance_matrix(values, mask, V), p.m)
    return FkmModel(V, U, iterations, converged, tuple(int(r) for r in rows))


def fill_from_model(X, model: FkmModel):
    """Fill missing cells with membership-weighted center coordinates."""
    values, mask, as_matrix = _coerce(X)
    U = model.memberships
    if U.shape[0] != values.shape[0] or model.centers.shape[1] != values.shape[1]:
        raise ValueError("model does not match the data shape")
    estimate = (U @ model.centers) / U.sum(axis=1, keepdims=True)
    return _wrap(np.where(mask, values, estimate), as_matrix)


def impute_fkm(X, params: Optional[FkmParams] = None):
    return fill_from_model(X, fkm_cluster(X, params))


def derived_seeds(seed: Optional[int], runs: int) -> List[int]:
    """Independent per-run seeds spawned from one base seed."""
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    children = np.random.SeedSequence(seed).spawn(runs)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def impute_fkm_runs(X, params: Optional[FkmParams] = None, runs: int = 3):
    """Repeat FKM imputation from ``runs`` different random starts.

    Returns a list of ``(seed, model, filled)`` triples.
    """
    p = params or FkmParams()
    out = []
    for s in derived_seeds(p.seed, runs):
        run_params = FkmParams(p.n_clusters, p.m, p.epsilon, p.max_iter, s)
        model = fkm_cluster(X, run_params)
        out.append((s, model, fill_from_model(X, model)))
    return out


def _row_distances(values, mask, i) -> np.ndarray:
    """Partial distances from row ``i`` to all rows over co-observed fields."""
    S = values.shape[1]
    co = mask & mask[i]
    counts = co.sum(axis=1)
    diff = np.where(co, values - np.where(mask[i], values[i], 0.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = S / counts * np.sqrt((diff * diff).sum(axis=1))
    d[counts == 0] = np.inf
    d[i] = np.inf
    return d


def impute_knn(X, k: int = 5):
    """Fill each missing cell with the mean of its ``k`` nearest donors.

    Donors for cell ``(i, j)`` are the other rows observing column ``j``.
    Distance is the partial distance over the fields both rows observe,
    scaled by ``S / (number co-observed)``. Ties go to the lower row index.
    Rows sharing no observed field with ``i`` are never donors; if no donor
    remains the column mean is used.
    """
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k}")
    values, mask, as_matrix = _coerce(X)
    _check_columns(mask)
    N = values.shape[0]
    if k >= N:
        warnings.warn(f"k={k} >= number of rows ({N}); KNN degenerates to a column mean over donors",
                      RuntimeWarning, stacklevel=2)
    col_mean = np.nanmean(values, axis=0)
    filled = values.copy()
    for i in np.flatnonzero(~mask.all(axis=1)):
        d = _row_distances(values, mask, i)
        for j in np.flatnonzero(~mask[i]):
            donors = np.flatnonzero(mask[:, j] & np.isfinite(d))
            if donors.size == 0:
                filled[i, j] = col_mean[j]
                continue
            order = donors[np.argsort(d[donors], kind="stable")][: int(k)]
            filled[i, j] = values[order, j].mean()
    return _wrap(np.where(mask, values, filled), as_matrix)


def impute(X, method: str, *, k: int = 5, params: Optional[FkmParams] = None):
    """Dispatch to one of :data:`METHODS` by name."""
    if method == "mean":
        return impute_mean(X)
    if method == "median":
        return impute_median(X)
    if method == "knn":
        return impute_knn(X, k)
    if method == "fkm":
        return impute_fkm(X, params)
    raise ValidationError(f"unknown imputation method {method!r}; choose from {METHODS}")
