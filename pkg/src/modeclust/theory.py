"""Numerical verifiers for the quantitative bounds behind the risk analysis.

Each check integrates or samples the relevant quantities and reports observed
left/right sides rather than assuming the math: the flow-perturbation bound,
the low-density lemma for spherical Gaussian mixtures (with its cap and
separation preconditions enforced first), the chi-square tail bound, and the
near-boundary gradient profile with its parameter-free flow-time inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import beta as beta_dist

from ._validation import check_points
from .density import GaussianMixture, sup_discrepancy
from .flow import FlowConfig, flow_at_times, true_labels
from .morse import boundary_level, grid_boundary_points, label_grid, landscape_stats, modes_of

BOUND_SLACK = 0.01  # integrator-error allowance on bound comparisons


@dataclass
class CheckCase:
    case_id: str
    lhs: float
    rhs: float
    violated: bool


@dataclass
class BoundCheckResult:
    """Uniform record for a battery of bound checks."""

    checked: int
    violations: int
    max_slack_ratio: float  # largest observed lhs/rhs
    details: list = field(default_factory=list, repr=False)
    skipped: int = 0
    precondition_failed: bool = False
    notes: str = ""

    @property
    def passed(self):
        return not self.precondition_failed and self.violations == 0


def _finish(details, skipped=0, notes=""):
    violations = sum(c.violated for c in details)
    ratios = [c.lhs / c.rhs for c in details if c.rhs > 0]
    max_ratio = max(ratios) if ratios else 0.0
    return BoundCheckResult(checked=len(details), violations=violations,
                            max_slack_ratio=max_ratio, details=details,
                            skipped=skipped, notes=notes)


# ---------------------------------------------------------------------------
# flow perturbation bound
# ---------------------------------------------------------------------------

def check_flow_perturbation(p, q, starts, times, probe, flow_config=None,
                            slack=BOUND_SLACK):
    """Compare flow divergence against its Gronwall-style bound.

    For each start x and time t, the distance between the ascent flows of p
    and q must stay below ``(g_gap / (h_max sqrt(d))) exp(h_max sqrt(d) t)``
    where ``g_gap`` is the sup gradient discrepancy and ``h_max`` the sup
    Hessian norm of p, both over the probe set. Violations beyond ``slack``
    indicate the probe underestimates those sups.
    """
    starts = check_points(starts, dim=p.dim, name="starts")
    times = np.sort(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    flow_config = flow_config or FlowConfig()

    g_gap = sup_discrepancy(p, q, probe).gradient_gap
    h_max = landscape_stats(p, probe).max_hessian_norm
    rate = h_max * math.sqrt(p.dim)

    details, skipped = [], 0
    for i, x in enumerate(starts):
        try:
            path_p = flow_at_times(p, x, times, flow_config)
            path_q = flow_at_times(q, x, times, flow_config)
        except RuntimeError:
            skipped += len(times)
            continue
        lhs = np.linalg.norm(path_q - path_p, axis=1)
        rhs = (g_gap / rate) * np.exp(rate * times)
        for k, t in enumerate(times):
            details.append(CheckCase(
                case_id=f"start{i}/t={t:g}", lhs=float(lhs[k]), rhs=float(rhs[k]),
                violated=bool(lhs[k] > rhs[k] * (1.0 + slack))))
    return _finish(details, skipped,
                   notes=f"gradient_gap={g_gap:.3e} hessian_bound={h_max:.3e}")


# ---------------------------------------------------------------------------
# low-density lemma for spherical Gaussian mixtures
# ---------------------------------------------------------------------------

def _spherical_sigma(gm):
    """Common sigma if every covariance is sigma^2 I, else None."""
    d = gm.dim
    sigmas = []
    for cov in gm.covariances:
        diag = np.diagonal(cov)
        if np.max(np.abs(cov - diag.mean() * np.eye(d))) > 1e-12 * max(diag.mean(), 1.0):
            return None
        sigmas.append(math.sqrt(diag.mean()))
    if max(sigmas) - min(sigmas) > 1e-12 * max(sigmas):
        return None
    return sigmas[0]


def low_density_epsilon_cap(gm):
    """Largest epsilon the lemma covers: min_j (pi_j^{1/d} / (sqrt(2 pi) sigma e^16))^d."""
    sigma = _spherical_sigma(gm)
    if sigma is None:
        raise ValueError("the low-density lemma needs spherical components with a common sigma")
    d = gm.dim
    return float(np.min((gm.weights ** (1.0 / d) / (math.sqrt(2 * math.pi) * sigma * math.e ** 16)) ** d))


def low_density_required_separation(gm, epsilon):
    """Mean-separation threshold: 2 sigma max_j sqrt(2d log(1/(sigma sqrt(2 pi))) + 2 log(1/eps) + 2 log pi_j)."""
    sigma = _spherical_sigma(gm)
    if sigma is None:
        raise ValueError("the low-density lemma needs spherical components with a common sigma")
    if epsilon <= 0:
        return 0.0
    d = gm.dim
    args = (2 * d * math.log(1.0 / (sigma * math.sqrt(2 * math.pi)))
            + 2 * math.log(1.0 / epsilon)
            - 2 * np.log(1.0 / gm.weights))
    return float(2 * sigma * np.sqrt(np.maximum(args, 0.0)).max())


def check_gaussian_low_density(gm, epsilon, n_mc, rng, confidence=0.99):
    """Monte Carlo check of P(density(X) < epsilon) <= e^{ -8 d }.

    The cap and separation preconditions are verified first; failing either
    yields ``precondition_failed``, never a silent pass. The tail target is
    far below Monte Carlo resolution, so the check passes only when zero
    events are observed; the exact Clopper-Pearson upper bound for the
    observed count is reported alongside.
    """
    epsilon = float(epsilon)
    n_mc = int(n_mc)
    sigma = _spherical_sigma(gm)
    if sigma is None:
        raise ValueError("the low-density lemma needs spherical components with a common sigma")

    cap = low_density_epsilon_cap(gm)
    if epsilon > cap:
        return BoundCheckResult(0, 0, 0.0, precondition_failed=True,
                                notes=f"epsilon {epsilon:.3e} exceeds cap {cap:.3e}")
    if gm.n_components > 1:
        seps = [np.linalg.norm(gm.means[i] - gm.means[j])
                for i in range(gm.n_components) for j in range(i + 1, gm.n_components)]
        need = low_density_required_separation(gm, epsilon)
        if min(seps) <= need:
            return BoundCheckResult(0, 0, 0.0, precondition_failed=True,
                                    notes=f"min separation {min(seps):.4g} <= required {need:.4g}")

    events = 0
    batch = 200_000
    done = 0
    while done < n_mc:
        take = min(batch, n_mc - done)
        x = gm.sample(take, rng)
        events += int(np.sum(gm.density(x) < epsilon))
        done += take
    estimate = events / n_mc
    upper = 1.0 - (1.0 - confidence) ** (1.0 / n_mc) if events == 0 else \
        float(beta_dist.ppf(confidence, events + 1, n_mc - events))
    rhs = math.exp(-8 * gm.dim)
    case = CheckCase(case_id=f"eps={epsilon:.3e}/n={n_mc}", lhs=estimate, rhs=rhs,
                     violated=events > 0)
    result = _finish([case], notes=f"events={events} cp_upper={upper:.3e}")
    result.checked = n_mc
    result.violations = events
    return result


# ---------------------------------------------------------------------------
# chi-square tail bound
# ---------------------------------------------------------------------------

def chi_square_tail_bound(t, d):
    """Concentration bound exp(-(t/2)(1 - 2 sqrt(2d/t))) for t >= 2d.

    Returns ``(bound, simplified)`` where ``simplified = exp(-t/4)`` is valid
    (and returned) only when t >= 32 d.
    """
    t = float(t)
    d = int(d)
    if d < 1:
        raise ValueError("d must be >= 1")
    if t < 2 * d:
        raise ValueError(f"bound requires t >= 2d (t={t}, d={d})")
    bound = math.exp(-(t / 2.0) * (1.0 - 2.0 * math.sqrt(2.0 * d / t)))
    simplified = math.exp(-t / 4.0) if t >= 32 * d else None
    return bound, simplified


def check_chi_square_tail(cases, n_draws, rng, confidence=0.99):
    """Monte Carlo dominance check of the tail bound at given (d, t) points.

    A case is a confident violation only when the one-sided lower confidence
    bound of the tail estimate exceeds the analytic bound.
    """
    details = []
    for d, t in cases:
        bound, _ = chi_square_tail_bound(t, d)
        draws = rng.chisquare(int(d), int(n_draws))
        events = int(np.sum(draws > t))
        estimate = events / n_draws
        if events == 0:
            lower = 0.0
        else:
            lower = float(beta_dist.ppf(1.0 - confidence, events, n_draws - events + 1))
        details.append(CheckCase(case_id=f"d={d}/t={t:g}", lhs=estimate, rhs=bound,
                                 violated=lower > bound))
    return _finish(details)


# ---------------------------------------------------------------------------
# near-boundary gradient profile and the flow-time inequality
# ---------------------------------------------------------------------------

@dataclass
class FlowProfilePoint:
    start: np.ndarray
    delta: float
    flow_time: float           # time to enter the core (0 if already inside)
    min_gradient_norm: float   # infimum of ||grad|| along that stretch
    entered_core: bool


@dataclass
class DeltaProfileResult:
    """Gradient-depression profile near a basin boundary.

    ``rows`` holds (delta, min over sampled points of the per-flow gradient
    infimum); ``gamma_estimate`` is the log-log slope of that envelope. Every
    completed flow is checked against ``flow_time * min_grad^2 <= mode
    density`` (the parameter-free inequality linking the three).
    """

    rows: list
    points: list = field(repr=False, default_factory=list)
    gamma_estimate: float | None = None
    mode_density: float = 0.0
    boundary_density: float = 0.0
    core_offset: float = 0.0
    time_bound_violations: int = 0
    time_bound_slack: float = 1e-6


def delta_profile(model, critical_points, mode_index, deltas, *,
                  core_offset_fraction=0.3, points_per_delta=12,
                  grid_resolution=64, grid_pad=2.0, flow_config=None,
                  max_flow_time=1e6, rng=None):
    """Profile the minimum gradient norm along flows started near the boundary.

    For each offset delta, points are placed at distance delta inside the
    target basin (normal offsets from grid-extracted boundary points) and
    integrated in raw time until their density reaches the core threshold.
    Requires d <= 2 for boundary extraction.
    """
    if model.dim > 2:
        raise ValueError("delta_profile requires dimension <= 2 (boundary extraction)")
    flow_config = flow_config or FlowConfig()
    rng = rng or np.random.default_rng(0)
    deltas = sorted(float(x) for x in deltas)
    if not deltas or min(deltas) <= 0:
        raise ValueError("deltas must be positive")

    mode_set = modes_of(critical_points)
    mode_loc = mode_set.locations[mode_index]
    p_m = float(mode_set.densities[mode_index])
    bl = boundary_level(model, critical_points, mode_index,
                        flow_config=flow_config, grid_resolution=grid_resolution,
                        grid_pad=grid_pad)
    if bl.no_boundary:
        raise ValueError("cluster has no boundary; the profile is undefined")
    xi = bl.value
    offset = core_offset_fraction * (p_m - xi)
    threshold = xi + offset

    locs = np.vstack([c.location for c in critical_points])
    lo = locs.min(axis=0) - grid_pad
    hi = locs.max(axis=0) + grid_pad
    pts, labels, shape = label_grid(model, mode_set, lo, hi, grid_resolution, flow_config)
    boundary = grid_boundary_points(pts, labels, shape, mode_index=mode_index)
    if boundary.shape[0] == 0:
        raise ValueError("no boundary points extracted at this grid resolution")

    normals = _boundary_normals(boundary, mode_loc)
    n_b = boundary.shape[0]
    take = min(points_per_delta, n_b)
    sel = np.linspace(0, n_b - 1, take).astype(int)

    candidates, cand_delta = [], []
    for delta in deltas:
        for i in sel:
            candidates.append(boundary[i] + delta * normals[i])
            cand_delta.append(delta)
    candidates = np.asarray(candidates)
    cand_labels = true_labels(model, candidates, mode_set, config=flow_config).labels

    points = []
    for x, delta, lab in zip(candidates, cand_delta, cand_labels):
        if lab != mode_index:
            continue  # offset landed outside the target basin
        points.append(_profile_one_flow(model, x, delta, threshold, flow_config, max_flow_time))

    rows = []
    for delta in deltas:
        vals = [pt.min_gradient_norm for pt in points if pt.delta == delta and pt.entered_core]
        if vals:
            rows.append((delta, min(vals)))

    gamma = None
    if len(rows) >= 2:
        ld = np.log([r[0] for r in rows])
        lv = np.log([max(r[1], 1e-300) for r in rows])
        gamma = float(np.polyfit(ld, lv, 1)[0])

    slack = 1e-6
    violations = sum(1 for pt in points
                     if pt.entered_core and pt.flow_time * pt.min_gradient_norm ** 2 > p_m + slack)
    return DeltaProfileResult(rows=rows, points=points, gamma_estimate=gamma,
                              mode_density=p_m, boundary_density=xi, core_offset=offset,
                              time_bound_violations=violations, time_bound_slack=slack)


def _boundary_normals(boundary, mode_loc, k=6):
    """Unit normals to the boundary cloud, oriented toward the mode."""
    n = boundary.shape[0]
    k = min(k, n)
    d2 = ((boundary[:, None, :] - boundary[None, :, :]) ** 2).sum(axis=2)
    normals = np.empty_like(boundary)
    for i in range(n):
        nbr = boundary[np.argsort(d2[i])[:k]]
        centered = nbr - nbr.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=True)
        normal = vt[-1]  # least-variance direction
        if np.dot(normal, mode_loc - boundary[i]) < 0:
            normal = -normal
        normals[i] = normal / np.linalg.norm(normal)
    return normals


def flow_time_inequality_cases(profile):
    """Recast a delta profile as bound cases: flow_time * min_grad^2 <= mode density."""
    details = []
    rhs = profile.mode_density + profile.time_bound_slack
    for i, pt in enumerate(profile.points):
        if not pt.entered_core:
            continue
        lhs = pt.flow_time * pt.min_gradient_norm ** 2
        details.append(CheckCase(case_id=f"delta={pt.delta:g}/pt{i}", lhs=float(lhs),
                                 rhs=rhs, violated=bool(lhs > rhs)))
    skipped = sum(1 for pt in profile.points if not pt.entered_core)
    return _finish(details, skipped=skipped,
                   notes=f"mode_density={profile.mode_density:.5g} "
                         f"gamma={profile.gamma_estimate}")


# ---------------------------------------------------------------------------
# the standard battery driven by the CLI `check` subcommand
# ---------------------------------------------------------------------------

def standard_check_battery(master_seed=20250811, which="all", *,
                           n_starts=50, smoothing_levels=(0.1, 0.15, 0.2),
                           times=(0.5, 1.0, 2.0), n_mc=1_000_000,
                           chi_square_cases=((1, 4.0), (3, 96.0), (10, 320.0)),
                           deltas=(0.05, 0.1, 0.2, 0.4, 0.8)):
    """Run the named checks on standard 2-d test mixtures; returns [(name, result)]."""
    from .density import build_probe_set, spherical_mixture
    from .morse import find_critical_points
    from .streams import STAGE_MC, STAGE_SAMPLE, substream

    results = []
    if which in ("all", "flow"):
        p = spherical_mixture([0.5, 0.5], [[-2.5, 0.0], [2.5, 0.0]], 1.0)
        starts = p.sample(n_starts, substream(master_seed, STAGE_SAMPLE, 101))
        probe = build_probe_set(points=starts, means=p.means, pad=1.0)
        for h in smoothing_levels:
            res = check_flow_perturbation(p, p.smoothed(h), starts, times, probe)
            results.append((f"flow_perturbation/h={h:g}", res))
    if which in ("all", "gaussian"):
        gm = spherical_mixture([0.5, 0.5], [[-4.5, 0.0], [4.5, 0.0]], 0.5)
        eps = low_density_epsilon_cap(gm)
        res = check_gaussian_low_density(gm, eps, n_mc,
                                         substream(master_seed, STAGE_MC, 102))
        results.append(("gaussian_low_density", res))
    if which in ("all", "chisq"):
        res = check_chi_square_tail(chi_square_cases, n_mc,
                                    substream(master_seed, STAGE_MC, 103))
        results.append(("chi_square_tail", res))
    if which in ("all", "delta"):
        gm = spherical_mixture([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], 1.0)
        cps = find_critical_points(gm)
        profile = delta_profile(gm, cps, 0, deltas)
        results.append(("flow_time_inequality", flow_time_inequality_cases(profile)))
    return results


def _profile_one_flow(model, x, delta, threshold, flow_config, max_flow_time):
    g0 = float(np.linalg.norm(model.gradient(x)))
    if model.density(x) >= threshold:
        return FlowProfilePoint(start=x, delta=delta, flow_time=0.0,
                                min_gradient_norm=g0, entered_core=True)

    def field(t, y):
        return model.gradient(y)

    def hit_core(t, y):
        return model.density(y) - threshold

    hit_core.terminal = True
    hit_core.direction = 1.0
    sol = solve_ivp(field, (0.0, max_flow_time), x, dense_output=True,
                    rtol=flow_config.rtol, atol=flow_config.atol, events=hit_core)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        return FlowProfilePoint(start=x, delta=delta, flow_time=float(sol.t[-1]),
                                min_gradient_norm=g0, entered_core=False)
    t_hit = float(sol.t_events[0][0])
    ts = np.linspace(0.0, t_hit, 512)
    path = sol.sol(ts).T
    grads = np.linalg.norm(model.gradient(path), axis=1)
    return FlowProfilePoint(start=x, delta=delta, flow_time=t_hit,
                            min_gradient_norm=float(min(grads.min(), g0)),
                            entered_core=True)
