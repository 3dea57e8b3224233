"""Descriptive summaries and box-plot five-number summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class DescriptiveStats:
    """Sample moments.  ``sd`` uses the n-1 denominator and is 0 when n == 1."""

    n: int
    mean: float
    sd: float
    sem: float
    min: float
    max: float

    @classmethod
    def from_moments(cls, n: int, mean: float, sd: float) -> "DescriptiveStats":
        """Summary known only through its moments (min/max are NaN)."""
        if n < 1:
            raise EmptyInput("n must be at least 1")
        if sd < 0:
            raise ValueError("sd must be non-negative")
        return cls(n, float(mean), float(sd), sd / math.sqrt(n), math.nan, math.nan)

    @property
    def variance(self) -> float:
        return self.sd * self.sd


def _as_array(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("no samples")
    return x


def describe(samples: Sequence[float] | np.ndarray) -> DescriptiveStats:
    x = _as_array(samples)
    n = x.size
    # compensated sums keep results independent of sample order
    mean = math.fsum(x.tolist()) / n
    if n > 1:
        sd = math.sqrt(math.fsum(((x - mean) ** 2).tolist()) / (n - 1))
    else:
        sd = 0.0
    return DescriptiveStats(n, mean, sd, sd / math.sqrt(n), float(x.min()), float(x.max()))


@dataclass(frozen=True)
class BoxSummary:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...] = field(default=())

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def box_summary(samples, whisker: float = 1.5) -> BoxSummary:
    """Quartiles by linear interpolation between order statistics.

    Whiskers reach the most extreme samples within ``whisker * IQR`` of the
    quartiles; anything beyond is an outlier.
    """
    x = np.sort(_as_array(samples))
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - whisker * iqr, q3 + whisker * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = x[(x < lo_fence) | (x > hi_fence)]
    return BoxSummary(float(q1), float(med), float(q3),
                      float(min(inside.min(), q1)), float(max(inside.max(), q3)),
                      tuple(float(v) for v in outliers))
