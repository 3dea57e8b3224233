import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gripforce.stats import StudentT, anova_two_way, holm_sidak, holm_sidak_within
from gripforce.stats.posthoc import sidak_level, simple_effect_comparisons


def test_single_comparison_uses_alpha():
    (c,) = holm_sidak([("expert vs novice", 648.5, 218.7, 48012)], 0.05)
    assert c.critical_level == 0.05 and c.significant


@pytest.mark.parametrize("k", range(2, 11))
def test_step_down_levels(k):
    comps = [(f"c{i}", 1.0, 10.0 - i * 0.5, 30) for i in range(k)]
    out = holm_sidak(comps, 0.05)
    for i, c in enumerate(out, 1):
        want = 1 - (1 - 0.05) ** (1 / (k - i + 1))
        assert abs(c.critical_level - want) < 1e-12


def test_two_level_value():
    assert sidak_level(0.05, 2) == pytest.approx(0.0253205655191036, abs=1e-15)


def test_step_down_stops_at_first_retention():
    # p values ascend; the second exceeds its level so all later ones are kept
    comps = [("a", 1, 5.0, 50), ("b", 1, 1.0, 50), ("c", 1, 8.0, 50)]
    out = holm_sidak(comps, 0.05)
    assert [c.label for c in out] == ["c", "a", "b"]
    assert [c.significant for c in out] == [True, True, False]


@given(st.lists(st.floats(0, 20), min_size=1, max_size=10), st.floats(0.001, 0.2))
def test_invariants(ts, alpha):
    out = holm_sidak([(str(i), 0.0, t, 25) for i, t in enumerate(ts)], alpha)
    ps = [c.p_unadjusted for c in out]
    assert ps == sorted(ps)
    sig = [c.significant for c in out]
    assert sig == sorted(sig, reverse=True)  # rejections form a prefix
    for c in out:
        if c.significant:
            assert c.p_unadjusted < c.critical_level
    levels = [c.critical_level for c in out]
    assert levels == sorted(levels) and levels[-1] == alpha


def test_input_validation():
    with pytest.raises(ValueError):
        holm_sidak([], 0.05)
    with pytest.raises(ValueError):
        holm_sidak([("a", 1, 1, 10)], 1.5)


def test_simple_effects_use_pooled_error():
    rng = np.random.default_rng(3)
    fa = np.repeat(["e", "n"], 40)
    fb = np.tile([5, 6, 7, 10], 20)
    y = rng.normal(size=80) + (fa == "n") * (fb == 7) * 3
    table = anova_two_way((fa, fb, y), "Subject", "Sensor")
    fams = simple_effect_comparisons((fa, fb, y), table)
    assert sorted(fams) == [5, 6, 7, 10]
    label, diff, t, df = fams[7][0]
    m = lambda s: y[(fa == s) & (fb == 7)].mean()  # noqa: E731
    assert diff == pytest.approx(abs(m("e") - m("n")))
    assert t == pytest.approx(diff / math.sqrt(table.error.ms * (1 / 10 + 1 / 10)))
    assert df == table.error.df == 72
    res = holm_sidak_within((fa, fb, y), table)
    assert res[7][0].significant and res[7][0].critical_level == 0.05
    assert res[7][0].p_unadjusted == StudentT(72).two_sided(t)
