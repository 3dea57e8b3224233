import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gripforce.stats import DegenerateDesign, SSType, anova_two_way
from gripforce.stats.anova import cell_table
from oracles import lstsq_anova


def random_design(rng, a, b, n):
    fa = np.concatenate([np.arange(a).repeat(b), rng.integers(0, a, n - a * b)])
    fb = np.concatenate([np.tile(np.arange(b), a), rng.integers(0, b, n - a * b)])
    y = rng.normal(size=n) * rng.uniform(0.5, 20) + 3 * fa - 2 * fb * (fa == 0) + rng.uniform(-50, 50)
    return fa, fb, y


def assert_matches(table, want, rel=1e-9):
    got = (table.a.ss, table.b.ss, table.interaction.ss)
    scale = want["total"]
    for g, w in zip(got, (want["A"], want["B"], want["AB"])):
        assert g == pytest.approx(w, rel=rel, abs=rel * scale)
    assert table.error.ss == pytest.approx(want["error"], rel=rel)
    assert (table.a.df, table.b.df, table.interaction.df, table.error.df) == want["df"]
    for row, f in zip(table.effects, want["F"]):
        assert row.f == pytest.approx(f, rel=rel, abs=1e-9)


def test_three_by_two_n30():
    rng = np.random.default_rng(2024)
    fa, fb, y = random_design(rng, 3, 2, 30)
    for kind in ("I", "III"):
        assert_matches(anova_two_way((fa, fb, y), ss_type=kind), lstsq_anova(fa, fb, y, kind))


@pytest.mark.parametrize("seed", range(25))
def test_random_unbalanced(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(2, 5, 2)
    fa, fb, y = random_design(rng, a, b, int(rng.integers(a * b + 1, 61)))
    for kind in ("I", "III"):
        t = anova_two_way((fa, fb, y), ss_type=kind)
        assert_matches(t, lstsq_anova(fa, fb, y, kind))


def test_type_i_sums_to_total():
    rng = np.random.default_rng(5)
    fa, fb, y = random_design(rng, 4, 3, 57)
    t = anova_two_way((fa, fb, y))
    parts = t.a.ss + t.b.ss + t.interaction.ss + t.error.ss
    assert parts == pytest.approx(t.ss_total, rel=1e-12)


def test_balanced_types_agree():
    rng = np.random.default_rng(8)
    fa = np.repeat([0, 1, 2], 8)
    fb = np.tile([0, 1], 12)
    y = rng.normal(size=24)
    t1, t3 = anova_two_way((fa, fb, y), ss_type="I"), anova_two_way((fa, fb, y), ss_type="III")
    for r1, r3 in zip(t1.effects, t3.effects):
        assert r1.ss == pytest.approx(r3.ss, rel=1e-10)


def test_exact_decomposition_flags_undefined_f():
    obs = [(a, b, 10.0 * a) for a in (0, 1) for b in (0, 1) for _ in range(3)]
    t = anova_two_way(obs)
    assert t.b.ss == 0 and t.interaction.ss == 0 and t.error.ss == 0
    assert t.a.ss == pytest.approx(300.0)
    assert t.f_undefined and all(math.isnan(r.f) for r in t.effects)


def test_table_two_df():
    rng = np.random.default_rng(0)
    n = 9705
    fb = np.concatenate([np.arange(10).repeat(2), rng.integers(0, 10, n - 20)])
    fa = np.concatenate([np.tile([0, 1], 10), rng.integers(0, 2, n - 20)])
    t = anova_two_way((fa, fb, rng.normal(size=n)), "Hand", "Session")
    assert t.df_triplet == (1, 9, 9685) and t.interaction.df == 9


def test_table_three_df():
    rng = np.random.default_rng(1)
    n = 51700
    fa = rng.integers(0, 2, n)
    fb = rng.choice([5, 6, 7, 10], n)
    t = anova_two_way((fa, fb, rng.normal(size=n)), "Subject", "Sensor")
    assert t.error.df == 51692 and t.levels_b == (5, 6, 7, 10)
    assert t["SubjectxSensor"].df == 3


def test_degenerate():
    with pytest.raises(DegenerateDesign) as info:
        anova_two_way([(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 0, 4.0), (0, 0, 5.0)])
    assert info.value.cell == (1, 1)
    with pytest.raises(DegenerateDesign):
        anova_two_way([(0, 0, 1.0), (0, 0, 2.0)])
    with pytest.raises(DegenerateDesign):
        anova_two_way([(a, b, 1.0 * a) for a in (0, 1) for b in (0, 1)])  # no error df
    with pytest.raises(DegenerateDesign):
        anova_two_way([])
    with pytest.raises(ValueError):
        anova_two_way([(0, 0, math.nan)])


def test_ss_type_parse():
    assert SSType.parse("type iii") is SSType.TYPE_III and SSType.parse("I") is SSType.TYPE_I
    with pytest.raises(ValueError):
        SSType.parse("II")


def test_cell_table():
    cells = cell_table([("x", 1, 2.0), ("x", 1, 4.0), ("y", 1, 1.0)])
    assert cells == {("x", 1): (2, 3.0), ("y", 1): (1, 1.0)}


designs = st.tuples(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))


@settings(max_examples=40, deadline=None)
@given(designs, st.floats(0.01, 1000), st.floats(-1e4, 1e4))
def test_affine_invariance(design, scale, shift):
    a, b, seed = design
    rng = np.random.default_rng(seed)
    fa, fb, y = random_design(rng, a, b, a * b + 20)
    t0 = anova_two_way((fa, fb, y), ss_type="III")
    t1 = anova_two_way((fa, fb, scale * y + shift), ss_type="III")
    for r0, r1 in zip(t0.effects, t1.effects):
        assert r1.ss == pytest.approx(scale ** 2 * r0.ss, rel=1e-7, abs=1e-9 * t1.ss_total)
        assert r1.f == pytest.approx(r0.f, rel=1e-6, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(designs)
def test_row_order_and_labels_irrelevant(design):
    a, b, seed = design
    rng = np.random.default_rng(seed)
    fa, fb, y = random_design(rng, a, b, a * b + 15)
    perm = rng.permutation(len(y))
    names = np.array(["lvl%d" % k for k in range(a)], dtype=object)
    for kind in ("I", "III"):
        t0 = anova_two_way((fa, fb, y), ss_type=kind)
        t1 = anova_two_way((names[fa[perm]], fb[perm], y[perm]), ss_type=kind)
        for r0, r1 in zip(t0.effects, t1.effects):
            assert r1.ss == pytest.approx(r0.ss, rel=1e-8, abs=1e-10 * t0.ss_total)
