import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import constant_sample, partial_samples
from fdrecon.depth import DepthKind
from fdrecon.envelope import Envelope, build_envelope
from fdrecon.errors import NoEnvelope
from fdrecon.fdcore import FunctionalSample, Grid
from fdrecon.reconstruct import (DEFAULT_THETA_GRID, ReconstructConfig, computable_obs_set, envelope_delta,
                                 pointwise_weights, reconstruct_sample, reconstruct_with_theta, theta_objective,
                                 tune_theta)
from fdrecon.simgen import MissingSpec, Mechanism, corrupt, gp_sample, make_rng


def manual_envelope(focal, members, distances):
    return Envelope(focal=focal, members=tuple(members), member_distance=tuple(float(d) for d in distances),
                    final_depth=1.0, enveloped_measure=0.0)


def half_missing(levels, T=8):
    m = np.ones((len(levels), T), bool)
    m[0, T // 2:] = False
    return constant_sample(levels, T=T, masks=m)


class TestEstimator:
    def test_theta_zero_is_plain_mean(self):
        s = half_missing([0.0, 1.0, 2.0, 6.0])
        env = manual_envelope(0, [1, 2, 3], [0.3, 0.7, 1.9])
        out = reconstruct_with_theta(s, env, 0.0)
        assert np.all(out[4:] == np.mean([1.0, 2.0, 6.0]))
        assert np.all(np.isnan(out[:4]))

    def test_single_member(self):
        s = half_missing([0.0, 1.5, 9.0])
        out = reconstruct_with_theta(s, manual_envelope(0, [1], [0.4]), 3.0)
        assert np.all(out[4:] == 1.5)

    def test_two_members_closed_form(self):
        s = half_missing([0.0, 1.0, 4.0])
        out = reconstruct_with_theta(s, manual_envelope(0, [1, 2], [0.5, 1.0]), 1.0)
        e1, e2 = math.exp(-1), math.exp(-2)
        assert out[5] == pytest.approx((e1 * 1.0 + e2 * 4.0) / (e1 + e2), rel=1e-14)

    def test_delta_floor_selects_duplicate(self):
        s = half_missing([0.0, 2.0, 3.0])
        env = manual_envelope(0, [1, 2], [0.0, 1e-3])
        assert envelope_delta(env) == 1e-12
        out = reconstruct_with_theta(s, env, 1.0)
        assert np.all(out[4:] == 2.0)

    def test_huge_ratio_no_underflow(self):
        s = half_missing([0.0, 2.0, 3.0])
        out = reconstruct_with_theta(s, manual_envelope(0, [1, 2], [5.0, 9.0]), 1e6)
        assert np.all(out[4:] == 2.0)

    def test_empty_envelope(self):
        with pytest.raises(NoEnvelope):
            reconstruct_with_theta(half_missing([0.0, 1.0]), manual_envelope(0, [], []), 1.0)

    def test_unfilled_where_no_member_observed(self):
        s = half_missing([0.0, 1.0, 2.0])
        m = s.mask.copy()
        m[1:, 6] = False
        s = s.with_mask(m)
        out = reconstruct_with_theta(s, manual_envelope(0, [1, 2], [1.0, 2.0]), 1.0)
        assert np.isnan(out[6]) and not np.isnan(out[5])

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=6), st.floats(0, 64), st.data())
    def test_weights_normalized(self, dist, theta, data):
        k = len(dist)
        avail = np.array(data.draw(st.lists(st.booleans(), min_size=3 * k, max_size=3 * k))).reshape(k, 3)
        delta = max(min(dist), 1e-12)
        w = pointwise_weights(dist, avail, theta, delta)
        for t in range(3):
            if avail[:, t].any():
                assert w[:, t].sum() == pytest.approx(1.0, abs=1e-12)
                assert np.all(w[avail[:, t], t] > 0) or theta * max(dist) / delta > 700
            else:
                assert np.all(w[:, t] == 0)


class TestComputableSet:
    def test_members_saturate(self):
        s = constant_sample([0.0, 1.0, 2.0])
        assert computable_obs_set(s, manual_envelope(0, [1], [1.0])).all()

    def test_empty(self):
        assert not computable_obs_set(constant_sample([0.0, 1.0]), manual_envelope(0, [], [])).any()

    def test_union(self):
        T = 11
        t = Grid.uniform(T).points
        m = np.ones((3, T), bool)
        m[1] = t <= 0.3 + 1e-12
        m[2] = (t >= 0.2 - 1e-12) & (t <= 0.6 + 1e-12)
        s = constant_sample([0.0, 1.0, 2.0], T=T, masks=m)
        got = computable_obs_set(s, manual_envelope(0, [1, 2], [1.0, 2.0]))
        assert np.array_equal(got, t <= 0.6 + 1e-12)


class TestTheta:
    def test_single_value_grid(self):
        s, envs = self._dup_sample()
        assert tune_theta(s, envs, [0.0]) == 0.0

    def _dup_sample(self):
        # every curve has an exact duplicate plus a shifted neighbour
        rng = np.random.default_rng(3)
        T = 20
        base = rng.normal(size=(4, T))
        vals = np.vstack([base, base, base + 0.7])
        mask = rng.random(vals.shape) < 0.6
        mask[:, :3] = True
        s = FunctionalSample(Grid.uniform(T), np.where(mask, vals, np.nan), mask)
        envs = []
        for i in range(4):
            envs.append(manual_envelope(i, [i + 4, i + 8], [0.0, 0.7]))
        return s, envs

    def test_duplicates_favour_largest_theta(self):
        s, envs = self._dup_sample()
        obj = theta_objective(s, envs, DEFAULT_THETA_GRID)
        assert np.all(np.diff(obj) <= 1e-15)
        assert obj[-1] == obj.min()
        # with the 1e-12 floor on delta every positive theta already isolates
        # the duplicate, so the smallest positive grid value ties
        assert tune_theta(s, envs) == 0.25

    def test_symmetric_members_constant_objective(self):
        s = constant_sample([0.0, -1.0, 1.0], T=6)
        envs = [manual_envelope(0, [1, 2], [1.0, 1.0])]
        obj = theta_objective(s, envs, DEFAULT_THETA_GRID)
        assert np.all(obj == obj[0])
        assert tune_theta(s, envs, (4.0, 1.0, 2.0)) == 1.0

    def test_no_envelopes(self):
        with pytest.raises(NoEnvelope):
            tune_theta(constant_sample([0.0, 1.0]), [None])


def _gp_partial(n=60, T=30, p=50, c=0, seed=1, mech=Mechanism.RANDOM_POINTS, m=1):
    full = gp_sample(n, Grid.uniform(T), seed=make_rng(seed))
    return full, corrupt(full, MissingSpec(mech, c, p, m, seed=seed + 100))


class TestReconstructSample:
    def test_full_sample_untouched(self):
        full = gp_sample(10, Grid.uniform(12), seed=0)
        res, out = reconstruct_sample(full)
        assert res == [] and out == full

    def test_observed_part_preserved_and_convex(self):
        full, part = _gp_partial()
        res, out = reconstruct_sample(part)
        obs = part.mask
        assert np.array_equal(out.values[obs], part.values[obs])
        for r in res:
            env = r.envelope
            idx = list(env.members)
            vals = np.where(part.mask[idx], part.values[idx], np.nan)
            got = r.filled_mask
            lo, hi = np.nanmin(vals[:, got], axis=0), np.nanmax(vals[:, got], axis=0)
            assert np.all((r.filled_values[got] >= lo) & (r.filled_values[got] <= hi))
            assert not np.any(got & part.mask[r.focal])

    def test_theta_shared_and_fixed_theta(self):
        _, part = _gp_partial(n=40)
        res, _ = reconstruct_sample(part)
        assert len({r.theta for r in res}) == 1
        res2, _ = reconstruct_sample(part, config=ReconstructConfig(theta=2.5))
        assert all(r.theta == 2.5 for r in res2)

    def test_coverage_gap_flagged_and_fallback(self):
        _, part = _gp_partial(n=30, T=20)
        m = part.mask.copy()
        m[:, 7] = False
        part = part.with_mask(m)
        res, out = reconstruct_sample(part)
        assert all(r.coverage_fraction < 1 for r in res)
        assert all(r.status == "partial" for r in res)
        assert not out.mask[:, 7].any()
        res_fb, out_fb = reconstruct_sample(part, config=ReconstructConfig(fallback_mean=True))
        # nothing is observed at that point, so even the fallback cannot fill it
        assert not out_fb.mask[:, 7].any()

    def test_fallback_fills_envelope_gaps(self):
        T = 6
        m = np.ones((3, T), bool)
        m[0, 3:] = False
        m[1, 3:] = False
        m[2, :3] = False
        # curve 2 has no usable overlap with curve 0, leaving a single candidate,
        # which the selection loop never processes
        s = constant_sample([0.0, 0.2, 5.0], T=T, masks=m)
        res, out = reconstruct_sample(s, config=ReconstructConfig(theta=0.0, fallback_mean=True))
        r0 = next(r for r in res if r.focal == 0)
        assert r0.status == "empty_envelope" and r0.coverage_fraction == 0.0
        np.testing.assert_array_equal(r0.fallback_values[3:], [5.0, 5.0, 5.0])
        assert out.mask[0].all()

    def test_duplicate_fidelity(self):
        full = gp_sample(30, Grid.uniform(25), seed=4)
        vals = np.vstack([full.values, full.values[:1]])
        mask = np.ones(vals.shape, bool)
        mask[0, 10:20] = False
        s = FunctionalSample(full.grid, np.where(mask, vals, np.nan), mask)
        env = build_envelope(s, 0)
        assert 30 in env.members
        out = reconstruct_with_theta(s, env, max(DEFAULT_THETA_GRID))
        np.testing.assert_allclose(out[10:20], full.values[0, 10:20], atol=1e-6, rtol=0)

    def test_parallel_envelopes_match(self):
        _, part = _gp_partial(n=30, T=20)
        a, out_a = reconstruct_sample(part)
        b, out_b = reconstruct_sample(part, config=ReconstructConfig(workers=2))
        assert out_a == out_b
        assert [r.envelope.members for r in a] == [r.envelope.members for r in b]

    def test_large_interval_sample_full_coverage(self):
        full, part = _gp_partial(n=1000, T=100, p=50, c=50, seed=7, mech=Mechanism.RANDOM_INTERVALS, m=4)
        res, out = reconstruct_sample(part, DepthKind.MBD2, ReconstructConfig(theta=1.0))
        assert len(res) == 500
        assert all(r.coverage_fraction == 1.0 and r.status == "ok" for r in res)
        assert out.mask.all()

    @given(partial_samples(min_n=3, min_T=3, ties=False), st.sampled_from(["mbd2", "fm"]))
    def test_properties_on_random_samples(self, s, kind):
        assume((~s.complete).any())
        res, out = reconstruct_sample(s, kind, ReconstructConfig(theta_grid=(0.0, 1.0, 8.0)))
        assert np.array_equal(out.values[s.mask], s.values[s.mask])
        for r in res:
            assert 0.0 <= r.coverage_fraction <= 1.0
            if r.envelope is None or r.envelope.empty:
                assert not r.filled_mask.any()
                continue
            idx = list(r.envelope.members)
            got = r.filled_mask
            vals = np.where(s.mask[idx], s.values[idx], np.nan)[:, got]
            f = r.filled_values[got]
            assert np.all((f >= np.nanmin(vals, axis=0)) & (f <= np.nanmax(vals, axis=0)))
            mean0 = reconstruct_with_theta(s, r.envelope, 0.0)
            miss = ~s.mask[r.focal] & s.mask[idx].any(axis=0)
            ref = np.nanmean(np.where(s.mask[idx], s.values[idx], np.nan)[:, miss], axis=0)
            np.testing.assert_array_equal(mean0[miss], ref)
