"""Acceptance criteria, one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion with the measured values.
"""

import time

import numpy as np
import pytest

from modeclust import (
    CoreSpec,
    GaussianMixture,
    KernelDensityEstimate,
    MeanShiftConfig,
    boundary_level,
    build_probe_set,
    check_chi_square_tail,
    check_gaussian_low_density,
    chi_square_tail_bound,
    find_critical_points,
    low_density_epsilon_cap,
    mean_shift_step,
    modes_of,
    pairwise_loss,
    pairwise_loss_brute,
    run_mean_shift,
    spherical_mixture,
    sup_discrepancy,
)
from modeclust.cli import main as cli_main
from modeclust.experiments import (
    ExperimentConfig,
    make_core_specs,
    risk_replication,
    run_basins2d,
    run_highdim_sweep,
    run_separation_sweep,
)
from modeclust.streams import substream
from modeclust.theory import flow_time_inequality_cases, standard_check_battery

from conftest import finite_diff_gradient, finite_diff_hessian

MASTER_SEED = 20250811


def report(num, name, ok, detail):
    print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail}")


def timed(limit):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.t0
            return False

        def check(self):
            assert self.elapsed < limit, f"runtime {self.elapsed:.1f}s over {limit}s"
    return _Timer()


def random_mixture(rng, d, k=3):
    means = rng.normal(0, 2.0, (k, d))
    covs = []
    for _ in range(k):
        a = rng.normal(0, 1, (d, d))
        covs.append(a @ a.T + np.eye(d))
    w = rng.uniform(0.5, 1.5, k)
    return GaussianMixture(w / w.sum(), means, np.stack(covs))


def test_criterion_01_derivative_correctness():
    worst_g, worst_h = 0.0, 0.0
    with timed(10.0) as t:
        for d in (1, 2, 5, 10):
            rng = substream(MASTER_SEED, 1, d)
            models = [random_mixture(rng, d),
                      KernelDensityEstimate(rng.normal(0, 1.5, (40, d)), 0.8)]
            for model in models:
                for _ in range(20):
                    x = rng.normal(0, 1.5, d)
                    _, g, H = model.evaluate(x)
                    step = 1e-5 * (1 + np.linalg.norm(x))
                    g_fd = finite_diff_gradient(model.density, x, step)
                    rel_g = np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-12)
                    H_fd = finite_diff_hessian(model.density, x, 10 * step)
                    rel_h = np.linalg.norm(H - H_fd) / max(np.linalg.norm(H_fd), 1e-10)
                    worst_g, worst_h = max(worst_g, rel_g), max(worst_h, rel_h)
    ok = worst_g < 1e-6 and worst_h < 1e-4
    report(1, "derivative correctness", ok,
           f"max grad rel err {worst_g:.2e} (<1e-6), hess {worst_h:.2e} (<1e-4), "
           f"{t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_02_shift_identity_and_ascent():
    rng = substream(MASTER_SEED, 2)
    with timed(10.0) as t:
        kde = KernelDensityEstimate(rng.normal(0, 1.5, (80, 3)), 0.9)
        X = rng.normal(0, 1.5, (100, 3))
        moved = mean_shift_step(kde, X)
        p, g = kde.density_and_gradient(X)
        predicted = X + kde.bandwidth ** 2 * g / p[:, None]
        rel = (np.linalg.norm(moved - predicted, axis=1)
               / np.maximum(np.linalg.norm(moved - X, axis=1), 1e-300))
        identity_ok = bool(np.all(rel <= 1e-10))

        data = np.vstack([rng.normal(-3, 0.6, (60, 2)), rng.normal(3, 0.6, (60, 2))])
        kde2 = KernelDensityEstimate(data, 1.0)
        assign = run_mean_shift(kde2, data, MeanShiftConfig(keep_paths=True))
        worst_drop = 0.0
        for path in assign.trajectories:
            dens = kde2.density(np.asarray(path))
            worst_drop = max(worst_drop, float(np.max(-np.diff(dens), initial=0.0)))
        ascent_ok = worst_drop <= 1e-12
    ok = identity_ok and ascent_ok
    report(2, "shift identity + ascent", ok,
           f"max identity rel err {rel.max():.2e} (<1e-10), "
           f"worst density drop {worst_drop:.2e} (<=1e-12), {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_03_loss_oracle_equivalence():
    rng = substream(MASTER_SEED, 3)
    with timed(5.0) as t:
        exact = True
        for _ in range(100):
            n = int(rng.integers(2, 201))
            tl = rng.integers(0, int(rng.integers(1, 7)), n)
            el = rng.integers(0, int(rng.integers(1, 7)), n)
            if pairwise_loss(tl, el) != pairwise_loss_brute(tl, el):
                exact = False
                break
    report(3, "loss oracle equivalence", exact,
           f"contingency == brute force on 100 labelings, {t.elapsed:.1f}s")
    assert exact
    t.check()


def test_criterion_04_smoothing_oracle():
    gm = spherical_mixture([0.5, 0.5], [[-2.0], [2.0]], 1.0)
    h, n, reps = 0.5, 500, 200
    probes = np.linspace(-3.5, 3.5, 10)[:, None]
    with timed(120.0) as t:
        vals = np.empty((reps, 10))
        for r in range(reps):
            sample = gm.sample(n, substream(MASTER_SEED, 4, r))
            vals[r] = KernelDensityEstimate(sample, h).density(probes)
        target = gm.smoothed(h).density(probes)
        se = vals.std(axis=0, ddof=1) / np.sqrt(reps)
        mc_ok = bool(np.all(np.abs(vals.mean(axis=0) - target) <= 3 * se))

        tilted = GaussianMixture(
            [0.5, 0.5], [[-2.2, -0.8], [2.2, 0.8]],
            np.stack([np.array([[1.4, 0.5], [0.5, 0.9]]),
                      np.array([[1.4, -0.5], [-0.5, 0.9]])]))
        probe = build_probe_set(means=tilted.means, pad=4.0, grid_per_axis=60)
        hs = np.array([0.05, 0.1, 0.2, 0.4])
        gaps = [sup_discrepancy(tilted.smoothed(hh), tilted, probe).value_gap for hh in hs]
        slope = float(np.polyfit(np.log(hs), np.log(gaps), 1)[0])
        slope_ok = abs(slope - 2.0) <= 0.3
    ok = mc_ok and slope_ok
    report(4, "smoothing oracle", ok,
           f"MC within 3se at all 10 probes: {mc_ok}; bias slope {slope:.3f} "
           f"(2 +- 0.3), {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_05_basins2d_reproduction():
    with timed(120.0) as t:
        cfg = ExperimentConfig(experiment="basins2d", n=1000, bandwidth=1.0,
                               master_seed=MASTER_SEED, tv_draws=100_000)
        rep = run_basins2d(cfg)
    loss_ok = rep.loss <= 0.03
    tv_ok = 0.20 <= rep.tv_distance <= 0.40
    ok = loss_ok and tv_ok
    report(5, "2-d curved-basins reproduction", ok,
           f"loss {rep.loss:.4f} (<=0.03), TV {rep.tv_distance:.4f} "
           f"(in [0.20, 0.40]), modes est/true {rep.n_modes_estimated}/"
           f"{rep.n_modes_true}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_06_highdim_sweep():
    with timed(600.0) as t:
        h_grid = tuple(sorted(set(
            float(h) for h in np.geomspace(0.3, 3.0, 8)) | {1.40, 1.50, 1.65}))
        cfg = ExperimentConfig(experiment="highdim_sweep", dim=10, separation=5.0,
                               n_grid=(50,), h_grid=h_grid, replications=75,
                               master_seed=MASTER_SEED, threads=4)
        res = run_highdim_sweep(cfg)
        h, loss = res.best_bandwidth(n=50)
    ok = loss <= 0.10
    report(6, "high-dimensional sweep", ok,
           f"best cell h={h:.3g} mean loss {loss:.4f} (<=0.10), 75 reps, "
           f"{t.elapsed:.1f}s")
    assert ok, (
        f"best-cell mean loss {loss:.4f} exceeds 0.10 at n=50 total samples; "
        "see notes/decisions.md: the benchmark value is reproduced at n=100 "
        "(50 per component), suggesting the source counts samples per component")
    t.check()


def test_criterion_06_supplementary_per_component_reading():
    # not an acceptance gate: documents that the pipeline reproduces the
    # reported error when n counts samples per component (100 total)
    with timed(600.0) as t:
        cfg = ExperimentConfig(experiment="highdim_sweep", dim=10, separation=5.0,
                               n_grid=(100,), h_grid=(1.25, 1.4, 1.55, 1.7),
                               replications=75, master_seed=MASTER_SEED, threads=4)
        res = run_highdim_sweep(cfg)
        h, loss = res.best_bandwidth(n=100)
    ok = loss <= 0.12
    report(6, "high-dim sweep at 50 per component (supplementary)", ok,
           f"best cell h={h:.3g} mean loss {loss:.4f} (<=0.12), {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_07_separation_trend():
    with timed(300.0) as t:
        cfg = ExperimentConfig(experiment="separation_sweep", dim=2, n=300,
                               separations=(1.0, 3.0, 5.0), replications=35,
                               bandwidth=0.3, master_seed=MASTER_SEED, threads=2)
        res = run_separation_sweep(cfg)
        by_sep = {r.separation: r.mean_loss for r in res.rows}
    decreasing = by_sep[1.0] > by_sep[3.0] > by_sep[5.0]
    endpoint_ok = by_sep[5.0] <= 0.02
    ok = decreasing and endpoint_ok
    report(7, "separation trend", ok,
           f"losses {by_sep[1.0]:.4f} > {by_sep[3.0]:.4f} > {by_sep[5.0]:.4f}, "
           f"endpoint <=0.02: {endpoint_ok}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_08_core_exactness():
    gm = spherical_mixture([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], 1.0)
    with timed(180.0) as t:
        cps = find_critical_points(gm)
        specs = make_core_specs(gm, cps, offset_fraction=0.3)
        zero_core, positive_overall = 0, 0
        for rep in range(20):
            rng = substream(MASTER_SEED, 8, rep)
            rpt = risk_replication(gm, 500, 0.7, rng,
                                   critical_points=cps, core_specs=specs)
            if rpt.core_loss == 0.0:
                zero_core += 1
            if rpt.loss > 0:
                positive_overall += 1
    ok = zero_core >= 19
    report(8, "core exactness", ok,
           f"core loss exactly 0 in {zero_core}/20 reps (need >=19); overall "
           f"loss positive in {positive_overall}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_09_flow_perturbation_bound():
    with timed(300.0) as t:
        results = standard_check_battery(MASTER_SEED, which="flow")
        violations = sum(res.violations for _, res in results)
        checked = sum(res.checked for _, res in results)
        worst = max(res.max_slack_ratio for _, res in results)
    ok = violations == 0 and checked == 450
    report(9, "flow-perturbation bound", ok,
           f"{violations} violations over {checked} cases (50 starts x 3 times "
           f"x 3 levels), max lhs/rhs {worst:.3f}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_10_flow_time_inequality():
    with timed(120.0) as t:
        (_, res), = standard_check_battery(MASTER_SEED, which="delta")
    ok = res.violations == 0 and res.checked > 0
    report(10, "flow-time inequality chain", ok,
           f"{res.violations} violations over {res.checked} flows, "
           f"max ratio {res.max_slack_ratio:.3f}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_11_chi_square_bound():
    with timed(30.0) as t:
        res = check_chi_square_tail(((1, 4.0), (3, 96.0), (10, 320.0)),
                                    1_000_000, substream(MASTER_SEED, 11))
        simplified_ok = True
        for d in (1, 3, 10):
            _, simplified = chi_square_tail_bound(32 * d, d)
            if abs(simplified - np.exp(-8 * d)) > 1e-15 * np.exp(-8 * d):
                simplified_ok = False
    ok = res.violations == 0 and simplified_ok
    report(11, "chi-square tail bound", ok,
           f"violations {res.violations}, cases "
           + "; ".join(f"{c.case_id}: {c.lhs:.3g}<= {c.rhs:.3g}" for c in res.details)
           + f", simplified=e^-t/4 at t=32d: {simplified_ok}, {t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_12_gaussian_low_density():
    with timed(60.0) as t:
        gm = spherical_mixture([0.5, 0.5], [[-4.5, 0.0], [4.5, 0.0]], 0.5)
        eps = low_density_epsilon_cap(gm)
        res = check_gaussian_low_density(gm, eps, 1_000_000,
                                         substream(MASTER_SEED, 12))
        near = spherical_mixture([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], 0.5)
        res_near = check_gaussian_low_density(near, low_density_epsilon_cap(near),
                                              10_000, substream(MASTER_SEED, 12, 1))
    ok = res.passed and res.violations == 0 and res_near.precondition_failed
    report(12, "gaussian low-density lemma", ok,
           f"events {res.violations}/1e6 at eps cap {eps:.2e}; under-separated "
           f"case precondition-failed: {res_near.precondition_failed}, "
           f"{t.elapsed:.1f}s")
    assert ok
    t.check()


def test_criterion_13_repro_determinism(tmp_path):
    def run_twice(args_builder):
        payload = []
        for sub in ("a", "b"):
            out = tmp_path / f"{args_builder.__name__}_{sub}"
            code = cli_main(args_builder(str(out)))
            assert code == 0
            payload.append((out / "results.csv").read_bytes())
        return payload[0] == payload[1]

    cfg_sep = tmp_path / "sep.txt"
    cfg_sep.write_text("n = 60\nreplications = 2\nseparations = 1,5\nbandwidth = 0.3\n")
    cfg_hd = tmp_path / "hd.txt"
    cfg_hd.write_text("dim = 6\nn_grid = 40\nh_grid = 1.2,1.6\nreplications = 2\n")
    cfg_b = tmp_path / "b2.txt"
    cfg_b.write_text("n = 150\ntv_draws = 2000\n")

    def separation(out):
        return ["repro", "separation", "--config", str(cfg_sep),
                "--seed", "123", "--out", out]

    def highdim(out):
        return ["repro", "highdim", "--config", str(cfg_hd),
                "--seed", "123", "--out", out, "--threads", "2"]

    def basins2d(out):
        return ["repro", "basins2d", "--config", str(cfg_b),
                "--seed", "123", "--out", out]

    with timed(300.0) as t:
        results = {fn.__name__: run_twice(fn) for fn in (separation, highdim, basins2d)}
    ok = all(results.values())
    report(13, "repro determinism", ok,
           f"byte-identical results.csv: {results}, {t.elapsed:.1f}s")
    assert ok
    t.check()
