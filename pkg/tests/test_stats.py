import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from scooterloco.analysis.stats import (
    DegenerateSample,
    InsufficientData,
    PairedSample,
    TestKind as ChosenTest,
    cohen_d_from_t,
    exact_signed_rank_p,
    paired_t,
    select_test,
    shapiro_wilk,
    signed_ranks,
    wilcoxon_signed_rank,
)

vals = st.floats(-1e3, 1e3, allow_nan=False).map(lambda v: round(v, 3))


def _brute_force_p(ranks, r_plus):
    ranks = np.asarray(ranks)
    m = len(ranks)
    mean = ranks.sum() / 2.0
    dev = abs(r_plus - mean)
    hits = 0
    for signs in itertools.product((0, 1), repeat=m):
        s = float(ranks[np.array(signs, dtype=bool)].sum())
        if abs(s - mean) >= dev - 1e-9:
            hits += 1
    return hits / 2**m


# -- Shapiro-Wilk ------------------------------------------------------------------


def test_sw_three_points():
    w, p = shapiro_wilk([1, 2, 3])
    assert w == pytest.approx(1.0, abs=1e-12) and p == pytest.approx(1.0)


def test_sw_degenerate_and_small():
    with pytest.raises(DegenerateSample):
        shapiro_wilk([5, 5, 5])
    with pytest.raises(InsufficientData):
        shapiro_wilk([1, 2])


def test_sw_bimodal_rejects():
    x = [0.0, 0.1, 0.05, 0.12, -0.03, 0.08, 0.02, 10.0, 10.1, 9.95, 10.05, 9.9, 10.2, 10.02]
    _, p = shapiro_wilk(x)
    assert p < 0.05
    assert p == pytest.approx(sps.shapiro(x).pvalue, rel=1e-4)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 11, 12, 14, 20, 50, 120, 1000])
def test_sw_matches_reference(n):
    rng = np.random.default_rng(n)
    for dist in (rng.standard_normal, rng.exponential, lambda size: rng.uniform(size=size)):
        x = dist(size=n)
        w, p = shapiro_wilk(x)
        ref = sps.shapiro(x)
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.lists(vals, min_size=3, max_size=40))
def test_sw_range(xs):
    if max(xs) - min(xs) < 1e-6:
        return
    w, p = shapiro_wilk(xs)
    assert 0.0 < w <= 1.0 and 0.0 <= p <= 1.0


# -- paired t ---------------------------------------------------------------------------


def test_paired_t_example():
    res = paired_t(PairedSample([1, 2, 3], [2, 4, 6]))
    assert res.t == pytest.approx(-3.4641016, abs=1e-6)
    assert res.df == 2
    assert res.p == pytest.approx(sps.ttest_rel([1, 2, 3], [2, 4, 6]).pvalue, abs=1e-12)
    assert res.p == pytest.approx(0.0742, abs=1e-4)


def test_paired_t_equal_is_degenerate():
    with pytest.raises(DegenerateSample):
        paired_t(PairedSample([1, 2, 3], [1, 2, 3]))


@pytest.mark.parametrize("t,n,d", [(6.15, 14, 1.64), (3.32, 14, 0.89), (2.19, 14, 0.59), (2.39, 14, 0.64)])
def test_cohen_d_anchors(t, n, d):
    assert cohen_d_from_t(t, n) == pytest.approx(d, abs=0.005)


def test_cohen_d_zero_and_guard():
    assert cohen_d_from_t(0.0, 10) == 0.0
    with pytest.raises(InsufficientData):
        cohen_d_from_t(1.0, 1)


pairs = st.integers(3, 20).flatmap(lambda n: st.tuples(st.lists(vals, min_size=n, max_size=n),
                                                        st.lists(vals, min_size=n, max_size=n)))


@settings(max_examples=60, deadline=None)
@given(pairs, st.floats(-100, 100).map(lambda c: round(c, 2)))
def test_paired_t_antisymmetric_and_shift_invariant(ab, c):
    a, b = ab
    try:
        fwd = paired_t(PairedSample(a, b))
    except DegenerateSample:
        return
    rev = paired_t(PairedSample(b, a))
    assert rev.t == pytest.approx(-fwd.t, rel=1e-9, abs=1e-9)
    assert rev.d == pytest.approx(-fwd.d, rel=1e-9, abs=1e-9)
    assert rev.p == pytest.approx(fwd.p, rel=1e-9, abs=1e-12)
    shifted = paired_t(PairedSample([x + c for x in a], [y + c for y in b]))
    assert shifted.t == pytest.approx(fwd.t, rel=1e-6, abs=1e-6)
    assert shifted.p == pytest.approx(fwd.p, rel=1e-6, abs=1e-9)


# -- Wilcoxon ---------------------------------------------------------------------------


def test_wilcoxon_examples():
    r = wilcoxon_signed_rank(PairedSample([1, 2, 3], [0, 0, 0]))
    assert (r.r_plus, r.r_minus, r.r, r.w) == (6.0, 0.0, 1.0, 0.0)
    r = wilcoxon_signed_rank(PairedSample([1, -2, 3], [0, 0, 0]))
    assert (r.r_plus, r.r_minus) == (4.0, 2.0) and r.r == pytest.approx(1 / 3)
    r = wilcoxon_signed_rank(PairedSample([1, -1, 0], [0, 0, 0]))
    assert r.r == 0.0 and r.n_nonzero == 2


def test_wilcoxon_all_zero_is_degenerate():
    with pytest.raises(DegenerateSample):
        wilcoxon_signed_rank(PairedSample([1, 2, 3], [1, 2, 3]))


def test_wilcoxon_exact_matches_reference_without_ties():
    rng = np.random.default_rng(11)
    for n in (5, 10, 14, 25):
        a = rng.normal(size=n)
        b = a + rng.normal(0.4, 1.0, n)
        ours = wilcoxon_signed_rank(PairedSample(a, b))
        ref = sps.wilcoxon(a, b, method="exact")
        assert ours.exact
        assert ours.w == ref.statistic
        assert ours.p == pytest.approx(ref.pvalue, abs=1e-12)


def test_wilcoxon_normal_approx_above_25():
    rng = np.random.default_rng(5)
    a = rng.normal(size=40)
    b = a + rng.normal(0.3, 1.0, 40)
    ours = wilcoxon_signed_rank(PairedSample(a, b))
    ref = sps.wilcoxon(a, b, method="approx", correction=True)
    assert not ours.exact
    assert ours.p == pytest.approx(ref.pvalue, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=3, max_size=10))
def test_exact_p_matches_brute_force_with_ties(diffs):
    if not any(diffs):
        return
    res = wilcoxon_signed_rank(PairedSample(diffs, [0] * len(diffs)))
    ranks, signs = signed_ranks(diffs)
    assert res.r_plus + res.r_minus == pytest.approx(res.n_nonzero * (res.n_nonzero + 1) / 2)
    assert res.p == _brute_force_p(ranks, res.r_plus)


@settings(max_examples=40, deadline=None)
@given(pairs, st.integers(-50, 50))
def test_wilcoxon_shift_invariant(ab, c):
    a, b = ab
    try:
        fwd = wilcoxon_signed_rank(PairedSample(a, b))
    except DegenerateSample:
        return
    moved = wilcoxon_signed_rank(PairedSample([x + c for x in a], [y + c for y in b]))
    # shifting by an integer keeps 3-decimal values exactly representable enough to rank identically
    assert (moved.w, moved.p, moved.r) == pytest.approx((fwd.w, fwd.p, fwd.r))


def test_exact_p_is_probability():
    assert exact_signed_rank_p([1, 2, 3], 3.0) == 1.0
    assert exact_signed_rank_p([1, 2, 3], 6.0) == 0.25


def test_r_from_z_for_reported_w():
    # n = 14, all differences distinct, W = 91 as R+
    m = 14
    mean = m * (m + 1) / 4
    sd = math.sqrt(m * (m + 1) * (2 * m + 1) / 24)
    z = (abs(91 - mean) - 0.5) / sd
    assert z / math.sqrt(m) == pytest.approx(0.638, abs=1e-3)


# -- gate --------------------------------------------------------------------------------


def test_select_gaussian_uses_t():
    rng = np.random.default_rng(2)
    a = rng.normal(10, 1, 30)
    b = a - rng.normal(0.5, 1.0, 30)
    rep = select_test(PairedSample(a, b), "m")
    assert rep.chosen_test is ChosenTest.PAIRED_T and rep.normality[1] >= 0.05
    assert rep.effect_size_kind == "cohen_d" and rep.df == 29


def test_select_skewed_uses_wilcoxon():
    rng = np.random.default_rng(3)
    b = rng.normal(size=30)
    a = b + rng.exponential(1.0, 30) ** 3
    rep = select_test(PairedSample(a, b), "m")
    assert rep.chosen_test is ChosenTest.WILCOXON and rep.normality[1] < 0.05
    assert rep.df is None and rep.effect_size_kind == "rank_biserial"
    d = rep.to_dict()
    assert d["normality"]["normal"] is False and "r_plus" in d


def test_select_needs_three_pairs():
    with pytest.raises(InsufficientData):
        select_test(PairedSample([1, 2], [3, 4]))


def test_paired_sample_validation():
    with pytest.raises(ValueError):
        PairedSample([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        PairedSample([1, 2, math.inf], [1, 2, 3])
