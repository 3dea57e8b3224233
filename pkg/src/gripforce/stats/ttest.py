"""Pooled-variance two-sample Student t test."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .descriptive import DescriptiveStats, describe
from .distributions import StudentT


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class TTestResult:
    diff_of_means: float
    t: float
    df: int
    p: float
    ci95_low: float
    ci95_high: float
    se: float
    a: DescriptiveStats
    b: DescriptiveStats
    zero_variance: bool = False

    def lines(self, name_a: str = "a", name_b: str = "b") -> list[str]:
        from .report import format_p
        rows = ["Group\tN\tMean\tStd Dev\tSEM"]
        for name, d in ((name_a, self.a), (name_b, self.b)):
            rows.append(f"{name}\t{d.n}\t{d.mean:.3f}\t{d.sd:.3f}\t{d.sem:.3f}")
        rows.append(f"diff_of_means\t{self.diff_of_means:.3f}")
        rows.append(f"t\t{self.t:.3f}")
        rows.append(f"df\t{self.df}")
        rows.append(f"p\t{format_p(self.p)}")
        rows.append(f"ci95\t{self.ci95_low:.3f}\t{self.ci95_high:.3f}")
        rows.append(f"summary\tdiff={self.diff_of_means:.3f} t={self.t:.3f} df={self.df} "
                    f"p={format_p(self.p)} ci95=[{self.ci95_low:.3f}, {self.ci95_high:.3f}]")
        if self.zero_variance:
            rows.append("flag\tzero pooled variance")
        return rows


def _stats(x) -> DescriptiveStats:
    return x if isinstance(x, DescriptiveStats) else describe(x)


def t_test_two_sample(a, b) -> TTestResult:
    """Compare means of ``a`` and ``b`` (samples or `DescriptiveStats`).

    With zero pooled variance the statistic is infinite (p = 0) unless the
    means coincide, in which case t = 0 and p = 1; either way
    ``zero_variance`` is set and the interval collapses to the difference.
    """
    sa, sb = _stats(a), _stats(b)
    if sa.n < 2 or sb.n < 2:
        raise InsufficientData(f"need at least 2 observations per group, got {sa.n} and {sb.n}")
    df = sa.n + sb.n - 2
    pooled = ((sa.n - 1) * sa.variance + (sb.n - 1) * sb.variance) / df
    se = math.sqrt(pooled * (1 / sa.n + 1 / sb.n))
    diff = sa.mean - sb.mean
    dist = StudentT(df)
    if se == 0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        p = 1.0 if diff == 0 else 0.0
        return TTestResult(diff, t, df, p, diff, diff, 0.0, sa, sb, zero_variance=True)
    t = diff / se
    half = dist.ppf(0.975) * se
    return TTestResult(diff, t, df, dist.two_sided(t), diff - half, diff + half, se, sa, sb)
