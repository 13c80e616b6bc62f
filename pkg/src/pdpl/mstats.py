"""Paired multivariate tests on pre/post score matrices.

Differences are always taken as ``post - pre``. Hotelling's statistic
``n * dbar' S^-1 dbar`` is computed with a symmetric (Bunch-Kaufman) solve,
never an explicit inverse, and is compared with
``(n - 1) p / (n - p) * F[p, n - p](alpha / m)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg

from .distributions import f_quantile, t_quantile
from .errors import SingularCovarianceError

CONDITION_LIMIT = 1e12
# singular values below (ROUNDING_FACTOR * eps * max|d|)^2 are rounding noise
ROUNDING_FACTOR = 64.0


@dataclass(frozen=True)
class PairedOutcome:
    """Complete ``n x p`` pre and post matrices for the same students."""

    pre: np.ndarray
    post: np.ndarray

    def __post_init__(self):
        pre = np.atleast_2d(np.asarray(self.pre, dtype=float))
        post = np.atleast_2d(np.asarray(self.post, dtype=float))
        if pre.ndim != 2 or pre.shape != post.shape:
            raise ValueError(f"pre {pre.shape} and post {post.shape} must be matrices of equal shape")
        if np.isnan(pre).any() or np.isnan(post).any():
            raise ValueError("paired outcome contains missing values; impute first")
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    @property
    def n(self) -> int:
        return self.pre.shape[0]

    @property
    def p(self) -> int:
        return self.pre.shape[1]


@dataclass(frozen=True)
class DiffStats:
    d: np.ndarray
    dbar: np.ndarray
    cov: np.ndarray


def diff_stats(po: PairedOutcome) -> DiffStats:
    if po.n < 2:
        raise ValueError(f"need at least 2 paired observations, got {po.n}")
    d = po.post - po.pre
    dbar = d.mean(axis=0)
    centred = d - dbar
    cov = centred.T @ centred / (po.n - 1)
    return DiffStats(d, dbar, cov)


def _offending_combination(cov: np.ndarray, names: Optional[List[str]]) -> str:
    """Describe the near-null direction of ``cov`` in terms of its variables."""
    w, v = np.linalg.eigh(cov)
    vec = v[:, 0]
    vec = vec / np.abs(vec).max()
    labels = names or [f"var{j + 1}" for j in range(len(vec))]
    terms = [f"{c:+.3g}*{lab}" for c, lab in zip(vec, labels) if abs(c) > 1e-6]
    return " ".join(terms)


def hotelling_t2(ds: DiffStats, n: int, names: Optional[List[str]] = None) -> float:
    """``n * dbar' S^-1 dbar`` via a symmetric linear solve.

    Raises
    ------
    SingularCovarianceError
        If the covariance condition number exceeds ``CONDITION_LIMIT``, or
        its smallest singular value is at the rounding level of the
        differences (e.g. ``post = pre + c`` exactly). The message names the
        linear combination of variables with (near) zero variance.
    """
    if not np.any(ds.dbar):
        # the quadratic form of a zero vector is zero whatever S is
        return 0.0
    cov = 0.5 * (ds.cov + ds.cov.T)
    sv = np.linalg.svd(cov, compute_uv=False)
    floor = (ROUNDING_FACTOR * np.finfo(float).eps * float(np.abs(ds.d).max())) ** 2
    cond = sv[0] / sv[-1] if sv[-1] > floor else math.inf
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        combo = _offending_combination(cov, names)
        raise SingularCovarianceError(
            f"difference covariance is singular or ill-conditioned (condition {cond:.3g}); "
            f"near-constant combination: {combo}",
            combination=combo, condition=float(cond),
        )
    w = scipy.linalg.solve(cov, ds.dbar, assume_a="sym")
    return max(float(n * ds.dbar @ w), 0.0)


def bonferroni(alpha: float, m: int) -> float:
    if int(m) != m or m < 1:
        raise ValueError(f"number of hypotheses must be a positive integer, got {m}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha / m


def critical_value(n: int, p: int, alpha: float) -> float:
    """Rejection threshold ``(n - 1) p / (n - p) * F[p, n - p](alpha)`` for T^2."""
    if p < 1 or n <= p:
        raise ValueError(f"need n > p >= 1, got n={n}, p={p}")
    return (n - 1) * p / (n - p) * f_quantile(p, n - p, alpha)


@dataclass(frozen=True)
class PairedTTest:
    t_squared: float
    critical_value: float
    alpha: float
    n: int
    mean_diff: float
    var_diff: float
    reject_null: bool


def paired_t_test(x, y, alpha: float = 0.05) -> PairedTTest:
    """Two-sided paired t-test in squared form.

    ``x`` holds the before and ``y`` the after observations. The statistic
    ``dbar^2 / (s^2 / n)`` is compared with ``t[n-1](alpha / 2)^2``. When the
    differences have zero variance the statistic is ``inf`` if their mean is
    nonzero (always rejects) and 0 otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = y - x
    dbar = float(d.mean())
    s2 = float(d.var(ddof=1))
    if s2 == 0.0:
        t2 = math.inf if dbar != 0.0 else 0.0
    else:
        t2 = dbar * dbar / (s2 / n)
    crit = t_quantile(n - 1, alpha / 2.0) ** 2
    return PairedTTest(t2, crit, alpha, n, dbar, s2, t2 > crit)


@dataclass(frozen=True)
class ColumnSummary:
    count: int
    mean: float
    min: float
    max: float
    sd: Optional[float]


def descriptive_stats(matrix) -> List[ColumnSummary]:
    """Per-column count, mean, min, max and sample sd, skipping NaN cells.

    ``sd`` is None for columns with a single observation.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    out = []
    for j in range(a.shape[1]):
        col = a[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise ValueError(f"column {j} has no observed values")
        sd = float(col.std(ddof=1)) if col.size >= 2 else None
        out.append(ColumnSummary(int(col.size), float(col.mean()), float(col.min()), float(col.max()), sd))
    return out


def improvement_percentages(pre, post, max_score: float = 2.0) -> np.ndarray:
    """``(mean(post_j) - mean(pre_j)) / max_score * 100`` per column.

    Means skip NaN cells, so raw (unimputed) gradebooks can be summarised.
    """
    if max_score <= 0:
        raise ValueError("max_score must be positive")
    pre = np.atleast_2d(np.asarray(pre, dtype=float))
    post = np.atleast_2d(np.asarray(post, dtype=float))
    if pre.shape != post.shape:
        raise ValueError(f"pre {pre.shape} and post {post.shape} differ in shape")
    return (np.nanmean(post, axis=0) - np.nanmean(pre, axis=0)) / max_score * 100.0


@dataclass(frozen=True)
class TestReport:
    t_squared: float
    critical_value: float
    f_quantile: float
    alpha_overall: float
    alpha_per_test: float
    m_tests: int
    reject_null: bool
    n: int
    p: int
    mean_diff: List[float]
    improvement_pct: List[float]
    descriptives: Dict[str, List[dict]] = field(default_factory=dict)
    variables: List[str] = field(default_factory=list)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)


def hotelling_test(po: PairedOutcome, alpha: float = 0.05, m: int = 1,
                   max_score: float = 2.0, variables: Optional[List[str]] = None) -> TestReport:
    """Paired Hotelling test at the Bonferroni-adjusted level ``alpha / m``."""
    if po.n <= po.p:
        raise ValueError(f"Hotelling test needs n > p, got n={po.n}, p={po.p}")
    names = list(variables) if variables is not None else [f"var{j + 1}" for j in range(po.p)]
    ds = diff_stats(po)
    t2 = hotelling_t2(ds, po.n, names)
    per_test = bonferroni(alpha, m)
    fq = f_quantile(po.p, po.n - po.p, per_test)
    crit = critical_value(po.n, po.p, per_test)
    desc = {
        key: [asdict(c) for c in descriptive_stats(mat)]
        for key, mat in (("pre", po.pre), ("post", po.post), ("diff", ds.d))
    }
    return TestReport(
        t_squared=t2,
        critical_value=crit,
        f_quantile=fq,
        alpha_overall=alpha,
        alpha_per_test=per_test,
        m_tests=int(m),
        reject_null=bool(t2 > crit),
        n=po.n,
        p=po.p,
        mean_diff=ds.dbar.tolist(),
        improvement_pct=improvement_percentages(po.pre, po.post, max_score).tolist(),
        descriptives=desc,
        variables=names,
    )
