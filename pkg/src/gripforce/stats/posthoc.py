"""Holm-Sidak step-down multiple comparisons."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

from .anova import AnovaTable, cell_table
from .distributions import StudentT


@dataclass(frozen=True)
class PostHocComparison:
    label: str
    diff_of_means: float
    t: float
    df: float
    p_unadjusted: float
    critical_level: float
    significant: bool


def sidak_level(alpha: float, m: int) -> float:
    """Per-test level ``1 - (1 - alpha)^(1/m)``; exactly ``alpha`` for m == 1."""
    if m == 1:
        return alpha
    return -math.expm1(math.log1p(-alpha) / m)


def holm_sidak(comparisons: Iterable[tuple[str, float, float, float]],
               alpha: float = 0.05) -> list[PostHocComparison]:
    """Step-down test of ``(label, diff, t, df)`` comparisons, ordered by p.

    The i-th smallest p of k is tested at ``sidak_level(alpha, k - i + 1)``;
    once one comparison is retained, all later ones are retained too.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    rows = [(label, diff, t, df, StudentT(df).two_sided(t)) for label, diff, t, df in comparisons]
    if not rows:
        raise ValueError("need at least one comparison")
    k = len(rows)
    order = sorted(range(k), key=lambda i: rows[i][4])
    out, rejecting = [], True
    for rank, idx in enumerate(order, 1):
        label, diff, t, df, p = rows[idx]
        crit = sidak_level(alpha, k - rank + 1)
        rejecting = rejecting and p < crit
        out.append(PostHocComparison(label, diff, t, df, p, crit, rejecting))
    return out


def simple_effect_comparisons(observations, table: AnovaTable) -> dict[object, list[tuple]]:
    """Pairwise A-level comparisons within each B level, using the ANOVA error term.

    Returns ``{level_b: [(label, |diff|, |t|, df_error), ...]}``, one family
    per level of B, ready for `holm_sidak`.
    """
    cells = cell_table(observations)
    mse, df = table.error.ms, table.error.df
    families = {}
    for lb in table.levels_b:
        fam = []
        for la1, la2 in itertools.combinations(table.levels_a, 2):
            n1, m1 = cells[(la1, lb)]
            n2, m2 = cells[(la2, lb)]
            diff = abs(m1 - m2)
            se = math.sqrt(mse * (1 / n1 + 1 / n2))
            t = diff / se if se > 0 else (math.inf if diff else 0.0)
            fam.append((f"{la1} vs {la2}", diff, t, df))
        families[lb] = fam
    return families


def holm_sidak_within(observations, table: AnovaTable,
                      alpha: float = 0.05) -> dict[object, list[PostHocComparison]]:
    return {lb: holm_sidak(fam, alpha)
            for lb, fam in simple_effect_comparisons(observations, table).items()}
