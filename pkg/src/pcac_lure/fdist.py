"""Regularized incomplete beta function and the F-distribution quantile.

Small self-contained implementation: the continued fraction for
``I_x(a, b)`` is evaluated with the modified Lentz method, and the inverse
is found with a bracketed Newton iteration that falls back to bisection.
"""

import math

__all__ = ["betainc", "betaincinv", "f_cdf", "f_ppf"]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def betainc(a, b, x):
    """Regularized incomplete beta function ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def _beta_pdf(a, b, x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - _log_beta(a, b))


def betaincinv(a, b, p, tol=1e-10):
    """Inverse of :func:`betainc` in ``x``: returns ``x`` with ``I_x(a, b) = p``.

    ``tol`` bounds the final step relative to ``min(x, 1 - x)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    for _ in range(_MAX_ITER):
        err = betainc(a, b, x) - p
        if err == 0.0:
            return x
        if err > 0:
            hi = x
        else:
            lo = x
        pdf = _beta_pdf(a, b, x)
        x_new = x - err / pdf if pdf > 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        scale = max(min(x_new, 1.0 - x_new), _TINY)
        if abs(x_new - x) <= tol * 1e-2 * scale or hi - lo <= tol * scale:
            return x_new
        x = x_new
    raise ArithmeticError("betaincinv did not converge")


def f_cdf(x, d1, d2):
    """CDF of the F distribution with ``(d1, d2)`` degrees of freedom."""
    if x <= 0:
        return 0.0
    return betainc(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))


def f_ppf(q, d1, d2, tol=1e-10):
    """Quantile (inverse CDF) of the F distribution at probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if q == 1.0:
        return math.inf
    if q <= 0.5:
        t = betaincinv(0.5 * d1, 0.5 * d2, q, tol=tol)
        return d2 * t / (d1 * (1.0 - t))
    # upper tail: solve for 1 - t so the ratio keeps full relative accuracy
    s = betaincinv(0.5 * d2, 0.5 * d1, 1.0 - q, tol=tol)
    return d2 * (1.0 - s) / (d1 * s)
