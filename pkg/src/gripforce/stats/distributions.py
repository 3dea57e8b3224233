"""Student t and F tail probabilities via the regularized incomplete beta.

The incomplete beta ratio is evaluated with the modified Lentz algorithm on
its continued fraction, switching to the symmetry relation
``I_x(a, b) = 1 - I_{1-x}(b, a)`` where the fraction converges slowly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

_TINY = 1e-300
_EPS = 1e-16
_MAXIT = 10_000


class DomainError(ValueError):
    """Degrees of freedom or statistic outside the distribution's domain."""


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
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


def _front(a: float, b: float, x: float) -> float:
    # x^a (1-x)^b / B(a, b)
    return math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                    + a * math.log(x) + b * math.log1p(-x))


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``, ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise DomainError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError("betainc requires 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    if x < (a + 1.0) / (a + b + 2.0):
        return _front(a, b, x) * _betacf(a, b, x) / a
    return 1.0 - _front(a, b, x) * _betacf(b, a, 1.0 - x) / b


def _check_df(*dfs: float) -> None:
    for df in dfs:
        if not (math.isfinite(df) and df >= 1):
            raise DomainError(f"degrees of freedom must be finite and >= 1, got {df}")


@dataclass(frozen=True)
class StudentT:
    df: float

    def __post_init__(self):
        _check_df(self.df)

    def two_sided(self, t: float) -> float:
        """P(|T| >= |t|)."""
        if math.isnan(t):
            raise DomainError("statistic is NaN")
        if math.isinf(t):
            return 0.0
        nu = self.df
        return betainc(nu / 2.0, 0.5, nu / (nu + t * t))

    def sf(self, t: float) -> float:
        """Upper tail P(T >= t)."""
        half = 0.5 * self.two_sided(t)
        return half if t >= 0 else 1.0 - half

    def pdf(self, t: float) -> float:
        nu = self.df
        return math.exp(math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
                        - 0.5 * math.log(nu * math.pi) - (nu + 1) / 2 * math.log1p(t * t / nu))

    def ppf(self, q: float) -> float:
        """Quantile function: the t with P(T <= t) = q."""
        if not 0.0 < q < 1.0:
            raise DomainError("quantile level must lie in (0, 1)")
        if q < 0.5:
            return -self.ppf(1.0 - q)
        if q == 0.5:
            return 0.0
        nu = self.df
        if nu == 1:
            return math.tan(math.pi * (q - 0.5))
        if nu == 2:
            return (2 * q - 1) * math.sqrt(2.0 / (4 * q * (1 - q)))
        target = 1.0 - q  # upper-tail mass
        z = NormalDist().inv_cdf(q)
        # Cornish-Fisher start, then safeguarded Newton on the upper tail
        t = z + (z ** 3 + z) / (4 * nu) + (5 * z ** 5 + 16 * z ** 3 + 3 * z) / (96 * nu ** 2)
        lo, hi = 0.0, math.inf
        for _ in range(100):
            f = self.sf(t) - target
            if f > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
            step = f / self.pdf(t)
            nxt = t + step
            if not lo < nxt < hi:
                nxt = (lo + hi) / 2 if math.isfinite(hi) else 2 * max(t, 1.0)
            if abs(nxt - t) <= 1e-15 * abs(nxt):
                return nxt
            t = nxt
        return t


@dataclass(frozen=True)
class FDist:
    df1: float
    df2: float

    def __post_init__(self):
        _check_df(self.df1, self.df2)

    def sf(self, f: float) -> float:
        """Upper tail P(F >= f)."""
        if math.isnan(f) or f < 0:
            raise DomainError(f"F statistic must be >= 0, got {f}")
        if math.isinf(f):
            return 0.0
        d1, d2 = self.df1, self.df2
        return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


def tail_probability(dist: StudentT | FDist, statistic: float) -> float:
    """Upper-tail p for F, two-sided p for t."""
    if isinstance(dist, StudentT):
        return dist.two_sided(statistic)
    if isinstance(dist, FDist):
        return dist.sf(statistic)
    raise TypeError(f"unsupported distribution {dist!r}")
