"""Text/TSV rendering of statistics in the usual journal table layouts."""
from __future__ import annotations

import math
from typing import Iterable

from .anova import AnovaRow, AnovaTable
from .posthoc import PostHocComparison

P_FLOOR = 1e-16


def format_p(p: float) -> str:
    """Never prints 0: anything under 1e-16 becomes ``< 1e-16``."""
    if math.isnan(p):
        return "undefined"
    if p < P_FLOOR:
        return "< 1e-16"
    return f"{p:.4g}"


def format_p_short(p: float) -> str:
    """Compact form: ``p<.001`` / ``p=.042``."""
    if math.isnan(p):
        return "p undefined"
    if p < 0.001:
        return "p<.001"
    return "p=" + f"{p:.3f}".lstrip("0")


def format_f(row: AnovaRow, df_error: int) -> str:
    if math.isnan(row.f):
        return f"F({row.df},{df_error}) undefined"
    return f"F({row.df},{df_error})={row.f:.4g}; {format_p_short(row.p)}"


def anova_lines(table: AnovaTable) -> list[str]:
    """TSV rows: effect, SS, df, MS, F, p, plus the compact F(df1,df2) string."""
    lines = [f"# two-way ANOVA {table.factor_a} x {table.factor_b}; Type {table.ss_type.value} SS; "
             f"n={table.n}",
             "effect\tSS\tdf\tMS\tF\tp\treport"]
    for row in table.effects:
        f = "nan" if math.isnan(row.f) else f"{row.f:.6g}"
        lines.append(f"{row.effect}\t{row.ss:.6g}\t{row.df}\t{row.ms:.6g}\t{f}\t{format_p(row.p)}"
                     f"\t{format_f(row, table.error.df)}")
    e = table.error
    lines.append(f"Error\t{e.ss:.6g}\t{e.df}\t{e.ms:.6g}\t\t\t")
    lines.append(f"Total\t{table.ss_total:.6g}\t{table.n - 1}\t\t\t\t")
    if table.f_undefined:
        lines.append("# flag: zero error variance, F undefined")
    return lines


def posthoc_lines(title: str, comparisons: Iterable[PostHocComparison]) -> list[str]:
    lines = [f"# {title}", "comparison\tdiff_of_means\tt\tp_unadjusted\tcritical_level\tsignificant"]
    for c in comparisons:
        lines.append(f"{c.label}\t{c.diff_of_means:.3f}\t{c.t:.3f}\t{format_p(c.p_unadjusted)}"
                     f"\t{c.critical_level:.3f}\t{'yes' if c.significant else 'no'}")
    return lines
