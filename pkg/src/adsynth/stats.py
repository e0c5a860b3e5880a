"""Small statistics kernel: incomplete beta, Student-t tail, Welch test, Pearson r."""

import math

import numpy as np

__all__ = [
    "StatisticsError",
    "betainc",
    "student_t_sf2",
    "student_t_cdf",
    "welch_t_test",
    "pearson_correlation",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 500


class StatisticsError(ValueError):
    pass


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
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
    raise StatisticsError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise StatisticsError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise StatisticsError(f"betainc argument outside [0, 1]: {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t, df):
    """Two-tailed tail probability P(|T| >= |t|) for Student's t with ``df`` dof."""
    if df <= 0:
        raise StatisticsError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(0.5 * df, 0.5, x)))


def student_t_cdf(t, df):
    tail = 0.5 * student_t_sf2(t, df)
    return 1.0 - tail if t > 0 else tail


def _sample(x, name):
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < 2:
        raise StatisticsError(f"{name} needs at least 2 values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise StatisticsError(f"{name} contains non-finite values")
    return arr


def welch_t_test(x, y):
    """Welch's unequal-variance t-test.

    Returns ``(t, p)`` where ``p`` is two-tailed using the
    Welch-Satterthwaite degrees of freedom.
    """
    x = _sample(x, "x")
    y = _sample(y, "y")
    nx, ny = x.size, y.size
    vx = x.var(ddof=1) / nx
    vy = y.var(ddof=1) / ny
    se2 = vx + vy
    if se2 == 0.0:
        raise StatisticsError("both samples have zero variance")
    diff = x.mean() - y.mean()
    t = diff / math.sqrt(se2)
    # Welch-Satterthwaite, normalized so tiny variances cannot underflow
    wx, wy = vx / se2, vy / se2
    df = 1.0 / (wx * wx / (nx - 1) + wy * wy / (ny - 1))
    return float(t), student_t_sf2(t, df)


def pearson_correlation(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise StatisticsError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise StatisticsError("correlation needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatisticsError("correlation undefined for zero-variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
