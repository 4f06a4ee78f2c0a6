"""Critical points, boundary levels, cores, landscape stats."""

import numpy as np
import pytest
from scipy.optimize import brentq

from modeclust import (
    CoreSpec,
    GradientFlowClustering,
    KernelDensityEstimate,
    boundary_level,
    build_probe_set,
    core_flags,
    core_membership,
    find_critical_points,
    landscape_stats,
    modes_of,
    run_mean_shift,
    spherical_mixture,
    sup_discrepancy,
    true_labels,
)
from modeclust.morse import default_seeds, grid_boundary_points, label_grid
from modeclust.streams import substream


def bisection_roots_1d(model, lo=-6.0, hi=6.0, n=4001):
    """Independent oracle: bracket and bisect the gradient's sign changes."""
    xs = np.linspace(lo, hi, n)
    dp = lambda t: model.gradient(np.array([t]))[0]
    vals = np.array([dp(x) for x in xs])
    roots = []
    for i in range(n - 1):
        if vals[i] == 0.0:
            roots.append(xs[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(dp, xs[i], xs[i + 1], xtol=1e-12))
    return np.array(roots)


class TestFindCriticalPoints:
    def test_single_gaussian(self):
        gm = spherical_mixture([1.0], [[1.0, -2.0]], 1.0)
        cps = find_critical_points(gm, np.zeros((1, 2)))
        assert len(cps) == 1
        assert cps[0].morse_index == 2 and cps[0].kind == "mode"
        np.testing.assert_allclose(cps[0].location, [1.0, -2.0], atol=1e-9)

    def test_1d_two_component(self, gm_1d_two):
        oracle = bisection_roots_1d(gm_1d_two)
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        assert len(cps) == 3 == len(oracle)
        found = np.sort([c.location[0] for c in cps])
        np.testing.assert_allclose(found, np.sort(oracle), atol=1e-9)
        kinds = sorted(c.kind for c in cps)
        assert kinds == ["minimum", "mode", "mode"]
        # mode near +-1.9987, verified against the bisection oracle
        assert abs(found[-1] - 1.99865134603) < 1e-8

    def test_2d_symmetric_saddle(self, gm_2d_sym):
        cps = find_critical_points(gm_2d_sym)
        kinds = sorted(c.kind for c in cps)
        assert kinds == ["mode", "mode", "saddle"]
        saddle = next(c for c in cps if c.kind == "saddle")
        np.testing.assert_allclose(saddle.location, [0.0, 0.0], atol=1e-9)
        assert saddle.morse_index == 1

    def test_gradient_small_at_roots(self, gm_2d_tilted):
        for c in find_critical_points(gm_2d_tilted):
            assert np.linalg.norm(gm_2d_tilted.gradient(c.location)) < 1e-9

    def test_component_relabeling_invariance(self, gm_2d_sym):
        flipped = spherical_mixture([0.5, 0.5], gm_2d_sym.means[::-1], 1.0)
        a = find_critical_points(gm_2d_sym)
        b = find_critical_points(flipped)
        la = np.sort(np.stack([c.location for c in a]), axis=0)
        lb = np.sort(np.stack([c.location for c in b]), axis=0)
        np.testing.assert_allclose(la, lb, atol=1e-10)

    def test_kde_modes_cross_check_mean_shift(self):
        rng = substream(33, 0)
        X = np.vstack([rng.normal(-3, 0.5, (40, 2)), rng.normal(3, 0.5, (40, 2))])
        kde = KernelDensityEstimate(X, 1.0)
        cps = find_critical_points(kde, default_seeds(kde), cross_check_mean_shift=True)
        newton_modes = np.stack([c.location for c in cps if c.kind == "mode"])
        ms = run_mean_shift(kde, X)
        assert len(ms.mode_set) == newton_modes.shape[0]
        for loc in ms.mode_set.locations:
            assert np.min(np.linalg.norm(newton_modes - loc, axis=1)) < 1e-6
        # every reported mode is a mean-shift fixed point of the KDE
        for loc in newton_modes:
            assert np.linalg.norm(kde.gradient(loc)) < 1e-8

    def test_degenerate_flagged(self):
        # equal mixture at separation exactly 2 sigma: p''(0) = 0 in 1-d
        gm = spherical_mixture([0.5, 0.5], [[-1.0], [1.0]], 1.0)
        cps = find_critical_points(gm, np.array([[0.0]]))
        assert len(cps) == 1
        assert cps[0].degenerate and cps[0].kind == "degenerate"


class TestBoundaryLevel:
    def test_unimodal_flagged_zero(self):
        gm = spherical_mixture([1.0], [[0.0, 0.0]], 1.0)
        cps = find_critical_points(gm, np.zeros((1, 2)))
        bl = boundary_level(gm, cps, 0)
        assert bl.value == 0.0 and bl.no_boundary

    def test_1d_value_at_central_minimum(self, gm_1d_two):
        # p(0) = 0.5 phi(2) + 0.5 phi(2) = phi(2), computed independently
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        expected = np.exp(-2.0) / np.sqrt(2 * np.pi)
        for j in range(2):
            bl = boundary_level(gm_1d_two, cps, j)
            assert bl.value == pytest.approx(expected, rel=1e-9)

    def test_2d_saddle_vs_grid_agreement(self, gm_2d_sym):
        cps = find_critical_points(gm_2d_sym)
        saddle_value = next(c.value for c in cps if c.kind == "saddle")
        bl = boundary_level(gm_2d_sym, cps, 0, grid_resolution=80)
        assert bl.critical_estimate == pytest.approx(saddle_value, rel=1e-12)
        assert bl.grid_estimate == pytest.approx(saddle_value, rel=0.02)
        assert bl.value >= saddle_value
        assert not bl.grid_disagrees


class TestCores:
    def test_mode_in_core(self, gm_1d_two):
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        mode_set = modes_of(cps)
        xi = boundary_level(gm_1d_two, cps, 0).value
        spec = CoreSpec(0, xi, offset=0.02)
        assert core_membership(gm_1d_two, spec, mode_set.locations[0], 0)

    def test_boundary_point_excluded(self, gm_1d_two):
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        xi = boundary_level(gm_1d_two, cps, 0).value
        spec = CoreSpec(0, xi, offset=0.01)
        assert not core_membership(gm_1d_two, spec, np.zeros(1), 0)
        assert not core_membership(gm_1d_two, spec, np.array([-1.9]), 1)

    def test_core_fraction_matches_monte_carlo(self, gm_1d_two):
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        mode_set = modes_of(cps)
        xi = boundary_level(gm_1d_two, cps, 0).value
        a = 0.02
        specs = [CoreSpec(j, xi, a) for j in range(2)]
        n = 10_000
        pts = gm_1d_two.sample(n, substream(35, 0))
        assign = true_labels(gm_1d_two, pts, mode_set, critical_points=cps)
        flags = core_flags(gm_1d_two, pts, assign.labels, specs)
        # direct Monte Carlo of P(p(X) >= xi + a) on an independent sample;
        # label restriction is immaterial here because the two cores tile the
        # high-density region symmetrically
        pts2 = gm_1d_two.sample(n, substream(35, 1))
        direct = np.mean(gm_1d_two.density(pts2) >= xi + a)
        se = np.sqrt(direct * (1 - direct) / n) + np.sqrt(flags.mean() * (1 - flags.mean()) / n)
        assert abs(flags.mean() - direct) <= 3 * se


class TestLandscapeStats:
    def test_standard_normal_gradient_peak(self):
        # max |p'| = phi(1) at x = +-1, verified by dense scan
        gm = spherical_mixture([1.0], [[0.0]], 1.0)
        probe = np.linspace(-5, 5, 4001)[:, None]
        stats = landscape_stats(gm, probe)
        expected = np.exp(-0.5) / np.sqrt(2 * np.pi)
        assert stats.max_gradient_norm == pytest.approx(expected, abs=1e-6)

    def test_single_critical_point_infinite_separation(self):
        gm = spherical_mixture([1.0], [[0.0]], 1.0)
        cps = find_critical_points(gm, np.zeros((1, 1)))
        stats = landscape_stats(gm, np.zeros((1, 1)), cps)
        assert stats.min_critical_separation == np.inf

    def test_1d_two_component_separation(self, gm_1d_two):
        cps = find_critical_points(gm_1d_two, np.linspace(-4, 4, 9)[:, None])
        stats = landscape_stats(gm_1d_two, np.linspace(-4, 4, 41)[:, None], cps)
        assert stats.min_critical_separation == pytest.approx(1.99865134603, abs=1e-8)


class TestTheorem3Properties:
    def test_core_distance_to_boundary(self, gm_2d_sym):
        # core points at offset a sit at distance >= a / sup||grad|| from the
        # grid-extracted boundary
        cps = find_critical_points(gm_2d_sym)
        mode_set = modes_of(cps)
        xi = boundary_level(gm_2d_sym, cps, 0).value
        a = 0.25 * (mode_set.densities[0] - xi)
        probe = build_probe_set(means=gm_2d_sym.means, pad=3.0, grid_per_axis=100)
        c_g = landscape_stats(gm_2d_sym, probe).max_gradient_norm

        locs = np.vstack([c.location for c in cps])
        pts, labels, shape = label_grid(gm_2d_sym, mode_set,
                                        locs.min(axis=0) - 2.5, locs.max(axis=0) + 2.5,
                                        resolution=96)
        boundary = grid_boundary_points(pts, labels, shape)

        rng = substream(37, 0)
        sample = gm_2d_sym.sample(400, rng)
        assign = true_labels(gm_2d_sym, sample, mode_set, critical_points=cps)
        specs = [CoreSpec(j, xi, a) for j in range(2)]
        flags = core_flags(gm_2d_sym, sample, assign.labels, specs)
        core_pts = sample[flags][:100]
        assert core_pts.shape[0] >= 30
        for x in core_pts:
            dist = np.min(np.linalg.norm(boundary - x, axis=1))
            assert dist >= a / c_g - 0.05  # grid boundary is only grid-accurate

    def test_smoothed_flow_preserves_core_co_labeling(self, gm_2d_sym):
        # all pairs of core points flow to a single mode under both the true
        # density and a slightly smoothed one
        h = 0.1
        smoothed = gm_2d_sym.smoothed(h)
        cps = find_critical_points(gm_2d_sym)
        mode_set = modes_of(cps)
        cps_s = find_critical_points(smoothed)
        mode_set_s = modes_of(cps_s)
        xi = boundary_level(gm_2d_sym, cps, 0).value

        probe = build_probe_set(means=gm_2d_sym.means, pad=3.0, grid_per_axis=60)
        gaps = sup_discrepancy(gm_2d_sym, smoothed, probe)
        c_g = landscape_stats(gm_2d_sym, probe).max_gradient_norm
        # offset proxy: gradient-bound times discrepancy plus twice the value gap
        a = c_g * gaps.max_gap + 2 * gaps.value_gap
        assert a < mode_set.densities[0] - xi

        rng = substream(37, 1)
        sample = gm_2d_sym.sample(600, rng)
        truth = true_labels(gm_2d_sym, sample, mode_set, critical_points=cps)
        specs = [CoreSpec(j, xi, a) for j in range(2)]
        flags = core_flags(gm_2d_sym, sample, truth.labels, specs)
        core_pts = sample[flags][:40]  # 40 points -> 780 pairs
        assert core_pts.shape[0] >= 20
        t = true_labels(gm_2d_sym, core_pts, mode_set, critical_points=cps)
        s = true_labels(smoothed, core_pts, mode_set_s, critical_points=cps_s)
        same_t = t.labels[:, None] == t.labels[None, :]
        same_s = s.labels[:, None] == s.labels[None, :]
        assert np.array_equal(same_t, same_s)


class TestEstimatorFacade:
    def test_fit_and_predict(self, gm_2d_sym):
        rng = substream(39, 0)
        X = gm_2d_sym.sample(60, rng)
        est = GradientFlowClustering(model=gm_2d_sym).fit(X)
        assert est.modes_.shape[0] == 2
        side = np.sign(est.modes_[est.labels_, 0])
        ok = np.abs(X[:, 0]) > 0.05
        assert np.array_equal(side[ok], np.sign(X[ok, 0]))
        np.testing.assert_array_equal(est.predict(X), est.labels_)

    def test_requires_model(self):
        with pytest.raises(ValueError, match="model"):
            GradientFlowClustering().fit(np.zeros((3, 2)))
