import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from conftest import constant_sample, partial_samples
from fdrecon.depth import (DepthKind, PointwiseCounts, ifd, pointwise_counts, poifd, poifd_all, poifd_subset,
                           univariate_depth)
from fdrecon.errors import EmptyCurve, EmptySection, StructuralError
from fdrecon.fdcore import FunctionalSample, Grid


def _column(values):
    return constant_sample(values, T=2)


class TestPointwiseCounts:
    @pytest.mark.parametrize("vals,x,expected", [
        ([1, 2, 3], 2, (1, 1, 3)),
        ([5, 5, 5], 5, (0, 3, 3)),
        ([1, 2, 2, 4], 3, (3, 0, 4)),
    ])
    def test_examples(self, vals, x, expected):
        c = pointwise_counts(_column(vals), 0, x)
        assert (c.below, c.tied, c.total) == expected

    def test_empty_section(self):
        m = np.array([[False, True], [False, True]])
        with pytest.raises(EmptySection):
            pointwise_counts(constant_sample([1.0, 2.0], T=2, masks=m), 0, 1.0)

    def test_members_restrict(self):
        c = pointwise_counts(_column([1, 2, 3, 4]), 0, 2.5, members=[0, 3])
        assert (c.below, c.total) == (1, 2)


class TestUnivariate:
    def test_fm_middle_of_three(self):
        assert univariate_depth("fm", PointwiseCounts(1, 1, 3)) == pytest.approx(5 / 6)

    def test_mbd2_middle_of_five(self):
        assert univariate_depth("mbd2", PointwiseCounts(2, 1, 5)) == pytest.approx(0.8)

    def test_mbd2_all_tied(self):
        assert univariate_depth("mbd2", PointwiseCounts(0, 4, 4)) == 1.0

    def test_mbd2_single_value(self):
        assert univariate_depth("mbd2", PointwiseCounts(0, 1, 1)) == 1.0

    @given(st.lists(st.integers(-4, 4), min_size=1, max_size=9), st.integers(-5, 5))
    def test_mbd2_matches_band_enumeration(self, vals, x):
        vals = vals + [x]
        c = PointwiseCounts(sum(v < x for v in vals), sum(v == x for v in vals), len(vals))
        assert univariate_depth("mbd2", c) == pytest.approx(oracles.band_depth_at(vals, x), abs=1e-15)

    @given(st.lists(st.integers(-4, 4), min_size=1, max_size=9), st.integers(-5, 5))
    def test_fm_matches_ecdf(self, vals, x):
        vals = vals + [x]
        c = PointwiseCounts(sum(v < x for v in vals), sum(v == x for v in vals), len(vals))
        assert univariate_depth("fm", c) == pytest.approx(oracles.fm_depth_at(vals, x), abs=1e-15)


class TestPOIFD:
    def test_two_constant_curves(self):
        s = constant_sample([0.0, 1.0])
        assert poifd(s, 0) == 1.0 and poifd(s, 1) == 1.0

    def test_five_constants(self):
        s = constant_sample([1, 2, 3, 4, 5])
        assert poifd(s, 2) == pytest.approx(0.8)
        assert poifd(s, 0) == pytest.approx(0.4)
        np.testing.assert_allclose(poifd_all(s), [0.4, 0.7, 0.8, 0.7, 0.4])

    def test_restricted_middle_curve(self):
        T = 11
        m = np.ones((5, T), bool)
        m[2, Grid.uniform(T).points > 0.5] = False
        assert poifd(constant_sample([1, 2, 3, 4, 5], T=T, masks=m), 2) == pytest.approx(0.8)

    def test_fm_three_constants(self):
        assert poifd(constant_sample([1, 2, 3]), 1, "fm") == pytest.approx(5 / 6)

    def test_single_curve(self):
        assert poifd(constant_sample([7.0]), 0) == 1.0
        assert ifd(constant_sample([7.0]), 0) == 1.0

    def test_empty_curve_raises(self):
        m = np.ones((2, 4), bool)
        m[0] = False
        s = constant_sample([1.0, 2.0], T=4, masks=m)
        with pytest.raises(EmptyCurve):
            poifd(s, 0)
        assert np.isnan(poifd_all(s)[0])

    @given(partial_samples(), st.sampled_from(["mbd2", "fm"]))
    def test_matches_enumeration_oracle(self, s, kind):
        vals, mask, pts = s.values.tolist(), s.mask.tolist(), s.grid.points.tolist()
        for i in range(s.n):
            if not s.mask[i].any():
                continue
            ref = oracles.poifd(vals, mask, pts, i, kind=kind)
            assert poifd(s, i, kind) == pytest.approx(ref, abs=1e-12)

    @given(partial_samples(), st.sampled_from(["mbd2", "fm"]))
    def test_bounded(self, s, kind):
        d = poifd_all(s, kind)
        ok = ~np.isnan(d)
        assert np.all((d[ok] >= 0) & (d[ok] <= 1))

    @given(partial_samples(), st.sampled_from(["mbd2", "fm"]))
    def test_monotone_transform_invariance(self, s, kind):
        # integer values keep the transform strictly increasing in floating point
        t = FunctionalSample(s.grid, np.where(s.mask, np.exp(s.values) * 3 - 1, np.nan), s.mask)
        np.testing.assert_array_equal(poifd_all(s, kind), poifd_all(t, kind))

    @given(partial_samples(full=True, ties=False), st.sampled_from(["mbd2", "fm"]))
    def test_full_observation_ifd_equal(self, s, kind):
        for i in range(s.n):
            assert ifd(s, i, kind) == poifd(s, i, kind)

    def test_ifd_rejects_partial(self):
        m = np.ones((2, 4), bool)
        m[0, 0] = False
        with pytest.raises(StructuralError):
            ifd(constant_sample([1.0, 2.0], T=4, masks=m), 0)

    @given(st.lists(st.floats(0.1, 5), min_size=3, max_size=10))
    def test_symmetric_sample_zero_curve_is_deepest(self, g):
        g = np.array(g)
        T = g.size
        s = FunctionalSample.from_complete(Grid.uniform(T), np.vstack([-g, np.zeros(T), g]))
        d = poifd_all(s, "mbd2")
        assert d[1] > d[0] and d[1] > d[2]

    def test_symmetric_sample_fm_ties_lowest_curve(self):
        # with F(x) = share of values <= x the ranks 1/3, 2/3, 1 give the
        # lowest and the middle curve the same depth
        s = constant_sample([-1.0, 0.0, 1.0])
        d = poifd_all(s, "fm")
        assert d[1] == d.max()
        np.testing.assert_allclose(d, [5 / 6, 5 / 6, 0.5])


class TestSubset:
    def test_empty_J(self):
        assert poifd_subset(constant_sample([0.0, 1.0]), 0, []) == 0.0

    def test_tied_member(self):
        assert poifd_subset(constant_sample([2.0, 2.0, 9.0]), 0, [1]) == 1.0

    def test_focal_in_J_rejected(self):
        with pytest.raises(ValueError):
            poifd_subset(constant_sample([0.0, 1.0]), 0, [0, 1])

    def test_four_curve_hand_example(self):
        vals = np.array([[0.0, 1.0, 2.0, 3.0], [1.0, 1.0, 1.0, 1.0], [-1.0, 0.0, 5.0, 2.0], [4.0, 4.0, 4.0, 4.0]])
        mask = np.array([[1, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]], bool)
        s = FunctionalSample(Grid.uniform(4), np.where(mask, vals, np.nan), mask)
        ref = oracles.poifd(vals.tolist(), mask.tolist(), s.grid.points.tolist(), 0, members=[1, 2])
        assert poifd_subset(s, 0, [1, 2]) == pytest.approx(ref, abs=1e-15)

    @given(partial_samples(), st.data())
    def test_matches_oracle(self, s, data):
        i = data.draw(st.integers(0, s.n - 1))
        assume(s.mask[i].any())
        J = data.draw(st.sets(st.integers(0, s.n - 1).filter(lambda j: j != i), min_size=1))
        ref = oracles.poifd(s.values.tolist(), s.mask.tolist(), s.grid.points.tolist(), i, members=J)
        assert poifd_subset(s, i, J) == pytest.approx(ref, abs=1e-12)


def test_kind_parse():
    assert DepthKind.parse("MBD2") is DepthKind.MBD2
    with pytest.raises(ValueError):
        DepthKind.parse("tukey")
