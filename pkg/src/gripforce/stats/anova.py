"""Two-way ANOVA with interaction for unbalanced, fully crossed designs.

Sums of squares are computed from cell counts and cell totals:

* Type I (sequential, A then B then A x B): ``SS_A`` from the A marginal
  means, ``SS_B|A`` from the reduced normal equations for B after absorbing
  A, and ``SS_AxB`` as the drop in residual SS from the additive model to the
  cell-means model.
* Type III (marginal): each effect is the quadratic form of its contrast on
  the cell means, ``(L m)' (L D^-1 L')^-1 (L m)``, with ``D`` the cell counts.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distributions import FDist


class SSType(enum.Enum):
    TYPE_I = "I"
    TYPE_III = "III"

    @classmethod
    def parse(cls, text: str) -> "SSType":
        key = str(text).upper().replace("TYPE", "").strip(" _-")
        for t in cls:
            if t.value == key:
                return t
        raise ValueError(f"unknown SS type {text!r}; use 'I' or 'III'")


class DegenerateDesign(ValueError):
    """The design cannot be analysed (missing levels, empty cells, no error df)."""

    def __init__(self, message: str, cell: tuple | None = None):
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class AnovaRow:
    effect: str
    ss: float
    df: int
    ms: float
    f: float = math.nan
    p: float = math.nan


@dataclass(frozen=True)
class AnovaTable:
    factor_a: str
    factor_b: str
    a: AnovaRow
    b: AnovaRow
    interaction: AnovaRow
    error: AnovaRow
    ss_total: float
    n: int
    ss_type: SSType
    levels_a: tuple
    levels_b: tuple
    f_undefined: bool = False

    @property
    def effects(self) -> tuple[AnovaRow, AnovaRow, AnovaRow]:
        return self.a, self.b, self.interaction

    def __getitem__(self, name: str) -> AnovaRow:
        for row in (*self.effects, self.error):
            if row.effect == name:
                return row
        raise KeyError(name)

    @property
    def df_triplet(self) -> tuple[int, int, int]:
        return self.a.df, self.b.df, self.error.df


def _level_index(values: np.ndarray) -> tuple[tuple, np.ndarray]:
    try:
        levels = sorted(set(values.tolist()))
    except TypeError:
        levels = sorted(set(values.tolist()), key=str)
    lookup = {lv: i for i, lv in enumerate(levels)}
    return tuple(levels), np.fromiter((lookup[v] for v in values.tolist()), dtype=np.intp,
                                      count=len(values))


def _split(observations) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(observations, tuple) and len(observations) == 3 and not np.isscalar(observations[0]):
        fa, fb, y = observations
    else:
        rows = list(observations)
        if not rows:
            raise DegenerateDesign("no observations")
        fa, fb, y = zip(*rows)
    fa = np.asarray(fa, dtype=object)
    fb = np.asarray(fb, dtype=object)
    y = np.asarray(y, dtype=float)
    if not (len(fa) == len(fb) == len(y)):
        raise ValueError("factor and value columns differ in length")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    return fa, fb, y


def _quad_form(contrast: np.ndarray, cell_means: np.ndarray, counts: np.ndarray) -> float:
    lm = contrast @ cell_means
    cov = (contrast / counts) @ contrast.T
    return float(lm @ np.linalg.solve(cov, lm))


def _contrast(k: int) -> np.ndarray:
    # (k-1) x k full-rank contrasts: level i minus the last level
    return np.hstack([np.eye(k - 1), -np.ones((k - 1, 1))])


def anova_two_way(observations: Iterable[tuple] | tuple[Sequence, Sequence, Sequence],
                  factor_a: str = "A", factor_b: str = "B",
                  ss_type: SSType | str = SSType.TYPE_I) -> AnovaTable:
    """Fit ``value ~ A * B`` by least squares.

    ``observations`` is an iterable of ``(level_a, level_b, value)`` or a
    three-column tuple ``(levels_a, levels_b, values)``.  Every cell must be
    non-empty.  When the error sum of squares vanishes the F ratios are NaN
    and ``f_undefined`` is set.
    """
    ss_type = SSType.parse(ss_type.value if isinstance(ss_type, SSType) else ss_type)
    fa, fb, y = _split(observations)
    levels_a, ia = _level_index(fa)
    levels_b, ib = _level_index(fb)
    a, b, n = len(levels_a), len(levels_b), len(y)
    if a < 2 or b < 2:
        raise DegenerateDesign(f"need at least 2 levels per factor, got {a} x {b}")
    counts = np.bincount(ia * b + ib, minlength=a * b).reshape(a, b).astype(float)
    empty = np.argwhere(counts == 0)
    if len(empty):
        i, j = empty[0]
        cell = (levels_a[i], levels_b[j])
        raise DegenerateDesign(f"empty cell {factor_a}={cell[0]!r}, {factor_b}={cell[1]!r}", cell)
    df_err = n - a * b
    if df_err < 1:
        raise DegenerateDesign(f"no error degrees of freedom (n={n}, cells={a * b})")

    yc = y - math.fsum(y.tolist()) / n
    totals = np.bincount(ia * b + ib, weights=yc, minlength=a * b).reshape(a, b)
    cell_means = totals / counts
    resid = yc - cell_means[ia, ib]
    ss_error = math.fsum((resid * resid).tolist())
    ss_total = math.fsum((yc * yc).tolist())

    n_a, n_b = counts.sum(axis=1), counts.sum(axis=0)
    t_a, t_b = totals.sum(axis=1), totals.sum(axis=0)
    mean_a = t_a / n_a

    if ss_type is SSType.TYPE_I:
        ss_a = float(np.sum(t_a * mean_a))
        # B adjusted for A: C q = Q with C = diag(n_.j) - N' diag(1/n_i.) N
        c_mat = np.diag(n_b) - (counts / n_a[:, None]).T @ counts
        q_vec = t_b - counts.T @ mean_a
        q_adj = np.linalg.solve(c_mat[:-1, :-1], q_vec[:-1])
        ss_b = float(q_vec[:-1] @ q_adj)
        rss_a = ss_total - ss_a
        ss_ab = rss_a - ss_b - ss_error
    else:
        m = cell_means.ravel()
        d = counts.ravel()
        ca, cb = _contrast(a), _contrast(b)
        ss_a = _quad_form(np.kron(ca, np.ones((1, b)) / b), m, d)
        ss_b = _quad_form(np.kron(np.ones((1, a)) / a, cb), m, d)
        ss_ab = _quad_form(np.kron(ca, cb), m, d)

    scale = max(ss_total, 1e-300)
    clean = lambda v: 0.0 if v < 1e-13 * scale else float(v)  # noqa: E731
    ss_a, ss_b, ss_ab = clean(ss_a), clean(ss_b), clean(ss_ab)
    if ss_error < 1e-13 * scale:
        ss_error = 0.0
    ms_err = ss_error / df_err
    undefined = ms_err == 0.0

    def row(name, ss, df):
        ms = ss / df
        if undefined:
            return AnovaRow(name, ss, df, ms)
        f = ms / ms_err
        return AnovaRow(name, ss, df, ms, f, FDist(df, df_err).sf(f))

    return AnovaTable(
        factor_a, factor_b,
        row(factor_a, ss_a, a - 1), row(factor_b, ss_b, b - 1),
        row(f"{factor_a}x{factor_b}", ss_ab, (a - 1) * (b - 1)),
        AnovaRow("Error", ss_error, df_err, ms_err),
        ss_total, n, ss_type, levels_a, levels_b, undefined)


def cell_table(observations) -> dict[tuple, tuple[int, float]]:
    """(level_a, level_b) -> (count, mean); handy for post-hoc contrasts and plots."""
    fa, fb, y = _split(observations)
    levels_a, ia = _level_index(fa)
    levels_b, ib = _level_index(fb)
    a, b = len(levels_a), len(levels_b)
    counts = np.bincount(ia * b + ib, minlength=a * b).reshape(a, b)
    sums = np.bincount(ia * b + ib, weights=y, minlength=a * b).reshape(a, b)
    return {(levels_a[i], levels_b[j]): (int(counts[i, j]), float(sums[i, j] / counts[i, j]))
            for i in range(a) for j in range(b) if counts[i, j]}
