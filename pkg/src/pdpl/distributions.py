"""F and Student-t tail probabilities and quantiles.

Everything rests on the regularized incomplete beta function, evaluated with
the modified Lentz continued fraction and inverted by Newton's method kept
inside a shrinking bisection bracket. Only :mod:`math` is used, so critical
values do not depend on any external statistics package.
"""

from __future__ import annotations

import math
from functools import lru_cache

from .errors import ConvergenceError

_FPMIN = 1e-300
_EPS = 1e-16
_CF_MAX_ITER = 1000
_INV_MAX_ITER = 300
CDF_TOLERANCE = 1e-10


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz's method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}",
                           abs(delta - 1.0))


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_pdf(a: float, b: float, x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - _log_beta(a, b))


def betainc_inv(a: float, b: float, target: float) -> float:
    """Solve ``I_x(a, b) = target`` for x in [0, 1].

    Newton steps are accepted only while they stay inside the current
    bracket; otherwise the step falls back to bisection. The answer is
    returned once the CDF residual reaches rounding level or the bracket
    collapses. A residual above ``CDF_TOLERANCE`` at the iteration cap
    raises :class:`ConvergenceError`.
    """
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target probability must lie in [0, 1], got {target}")
    if target == 0.0:
        return 0.0
    if target == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = 0.5
    best_x, best_resid = x, math.inf
    for _ in range(_INV_MAX_ITER):
        f = betainc(a, b, x) - target
        resid = abs(f)
        if resid < best_resid:
            best_x, best_resid = x, resid
        if f < 0:
            lo = x
        else:
            hi = x
        if resid <= 4 * _EPS * max(target, 1e-300):
            return x
        if hi - lo <= 4 * _EPS * max(x, 1e-300):
            # bracket at rounding level: the best iterate is as good as it gets
            return best_x
        pdf = _beta_pdf(a, b, x)
        step_ok = False
        if pdf > 0.0:
            cand = x - f / pdf
            if lo < cand < hi:
                step_ok = True
                if abs(cand - x) <= 2 * _EPS * x:
                    return cand if abs(betainc(a, b, cand) - target) <= best_resid else best_x
                x = cand
        if not step_ok:
            x = 0.5 * (lo + hi)
    if best_resid <= CDF_TOLERANCE:
        return best_x
    raise ConvergenceError(f"incomplete beta inversion failed for a={a}, b={b}, target={target}", best_resid)


def _check_df(*dfs: float) -> None:
    for df in dfs:
        if not df >= 1:
            raise ValueError(f"degrees of freedom must be >= 1, got {df}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly between 0 and 1, got {alpha}")


def _f_split(x: float, df1: float, df2: float):
    """Complementary beta arguments ``z = df1 x / (df1 x + df2)`` and ``1 - z``,
    each computed directly so that neither loses digits near 1."""
    den = df1 * x + df2
    return df1 * x / den, df2 / den


def f_cdf(x: float, df1: float, df2: float) -> float:
    _check_df(df1, df2)
    if x <= 0:
        return 0.0
    z, y = _f_split(x, df1, df2)
    if z <= 0.5:
        return betainc(df1 / 2.0, df2 / 2.0, z)
    return 1.0 - betainc(df2 / 2.0, df1 / 2.0, y)


def f_sf(x: float, df1: float, df2: float) -> float:
    """Upper tail P(F > x)."""
    _check_df(df1, df2)
    if x <= 0:
        return 1.0
    z, y = _f_split(x, df1, df2)
    if y <= 0.5:
        return betainc(df2 / 2.0, df1 / 2.0, y)
    return 1.0 - betainc(df1 / 2.0, df2 / 2.0, z)


@lru_cache(maxsize=1024)
def f_quantile(df1: float, df2: float, alpha: float) -> float:
    """Upper-tail F quantile: the x with ``P(F[df1, df2] > x) = alpha``.

    >>> round(f_quantile(7, 112, 0.05 / 7), 6)
    2.948244
    """
    _check_df(df1, df2)
    _check_alpha(alpha)
    a, b = df1 / 2.0, df2 / 2.0
    # solve on whichever tail is small so 1 - y never cancels
    if alpha <= 0.5:
        y = betainc_inv(b, a, alpha)  # y = df2 / (df2 + df1 x)
        return df2 * (1.0 - y) / (df1 * y)
    z = betainc_inv(a, b, 1.0 - alpha)  # z = df1 x / (df1 x + df2)
    return df2 * z / (df1 * (1.0 - z))


def t_cdf(t: float, df: float) -> float:
    _check_df(df)
    t2 = t * t
    y = df / (df + t2)
    if y <= 0.5:
        tail = 0.5 * betainc(df / 2.0, 0.5, y)
    else:
        tail = 0.5 * (1.0 - betainc(0.5, df / 2.0, t2 / (df + t2)))
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t)."""
    return t_cdf(-t, df)


@lru_cache(maxsize=1024)
def t_quantile(df: float, alpha: float) -> float:
    """Upper-tail Student-t quantile: the t with ``P(T[df] > t) = alpha``."""
    _check_df(df)
    _check_alpha(alpha)
    if alpha == 0.5:
        return 0.0
    if alpha > 0.5:
        return -t_quantile(df, 1.0 - alpha)
    two_tail = 2.0 * alpha
    if two_tail <= 0.5:
        y = betainc_inv(df / 2.0, 0.5, two_tail)  # y = df / (df + t^2)
        return math.sqrt(df * (1.0 - y) / y)
    z = betainc_inv(0.5, df / 2.0, 1.0 - two_tail)  # z = t^2 / (df + t^2)
    return math.sqrt(df * z / (1.0 - z))
