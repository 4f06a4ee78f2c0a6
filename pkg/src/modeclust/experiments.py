"""Experiment harness: sample -> cluster -> risk, replicated and swept.

Reproduces the three benchmark studies (2-d curved basins, the
high-dimensional bandwidth/sample-size sweep, and the separation sweep) plus
a generic custom run. Every stochastic stage draws from a substream keyed by
(master seed, stage, grid indices, replication), so adding cells or swapping
iteration order never changes any cell's result, and reruns are byte-stable.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assignment import UNRESOLVED
from .density import GaussianMixture, KernelDensityEstimate, spherical_mixture
from .flow import FlowConfig, true_labels
from .mean_shift import MeanShiftConfig, run_mean_shift
from .morse import CoreSpec, boundary_level, core_flags, default_seeds, find_critical_points, modes_of
from .risk import RiskReport, core_risk_decomposition
from .streams import STAGE_MC, STAGE_MIXTURE, STAGE_SAMPLE, substream

DEFAULT_N_GRID = (25, 50, 100, 200, 400)
DEFAULT_H_GRID = tuple(float(h) for h in np.geomspace(0.3, 3.0, 8))
DEFAULT_SEPARATIONS = (0.0, 1.0, 2.5, 3.0, 4.0, 5.0)


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    experiment: str = "custom"  # basins2d | highdim_sweep | separation_sweep | custom
    dim: int = 2
    n: int = 1000
    n_grid: tuple = DEFAULT_N_GRID
    h_grid: tuple = DEFAULT_H_GRID
    separations: tuple = DEFAULT_SEPARATIONS
    replications: int = 75
    master_seed: int = 20250811
    bandwidth: float = 1.0
    separation: float = 5.0
    eig_low: float = 0.5
    eig_high: float = 2.0
    core_offset_fraction: float = 0.3
    mixture: GaussianMixture | None = None
    tv_draws: int = 100_000
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name in ("n_grid", "h_grid", "separations"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")

    _FIELD_PARSERS = {
        "experiment": str, "dim": int, "n": int, "replications": int,
        "master_seed": int, "bandwidth": float, "separation": float,
        "eig_low": float, "eig_high": float, "core_offset_fraction": float,
        "tv_draws": int, "threads": int,
        "n_grid": lambda s: tuple(int(v) for v in str(s).split(",") if v.strip()),
        "h_grid": lambda s: tuple(float(v) for v in str(s).split(",") if v.strip()),
        "separations": lambda s: tuple(float(v) for v in str(s).split(",") if v.strip()),
    }

    @classmethod
    def from_mapping(cls, mapping):
        kwargs = {}
        for key, raw in mapping.items():
            if key not in cls._FIELD_PARSERS:
                raise ValueError(f"unknown config key: {key!r}")
            kwargs[key] = cls._FIELD_PARSERS[key](raw)
        return cls(**kwargs)


@dataclass
class ReplicationRecord:
    n: int
    h: float
    separation: float
    rep: int
    report: RiskReport
    n_modes_estimated: int
    runtime_seconds: float


@dataclass
class SweepRow:
    n: int
    h: float
    separation: float
    replications: int
    mean_loss: float
    stderr: float | None
    core_loss: float | None
    core_fraction: float
    excluded: int
    flagged: bool
    runtime_seconds: float


@dataclass
class SweepResult:
    rows: list
    records: list = field(default_factory=list, repr=False)

    def best_bandwidth(self, n=None):
        """(h, mean_loss) of the lowest-loss cell, optionally at a fixed n."""
        rows = [r for r in self.rows if n is None or r.n == n]
        best = min(rows, key=lambda r: r.mean_loss)
        return best.h, best.mean_loss


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def make_core_specs(mixture, critical_points, offset_fraction, flow_config=None):
    """One CoreSpec per mode: density bar = boundary level + a fraction of the headroom."""
    mode_set = modes_of(critical_points)
    specs = []
    for j in range(len(mode_set)):
        bl = boundary_level(mixture, critical_points, j, flow_config=flow_config) \
            if len(mode_set) > 1 else None
        xi = bl.value if bl is not None else 0.0
        headroom = max(float(mode_set.densities[j]) - xi, 0.0)
        specs.append(CoreSpec(cluster_index=j, boundary_density=xi,
                              offset=offset_fraction * headroom))
    return specs


def cluster_and_score(mixture, sample, bandwidth, *, critical_points=None,
                      core_specs=None, flow_config=None, ms_config=None,
                      truth=None):
    """Run truth + estimate on one sample and score the pair.

    Returns ``(report, truth_assignment, est_assignment)``; pass ``truth`` to
    reuse a precomputed ground-truth assignment across bandwidths.
    """
    flow_config = flow_config or FlowConfig()
    if truth is None:
        if critical_points is None:
            critical_points = find_critical_points(mixture, default_seeds(mixture, sample))
        truth = true_labels(mixture, sample, modes_of(critical_points),
                            config=flow_config, critical_points=critical_points)
    est = run_mean_shift(KernelDensityEstimate(sample, bandwidth), sample, ms_config)
    if core_specs:
        flags = core_flags(mixture, sample, truth.labels, core_specs)
    else:
        flags = np.zeros(sample.shape[0], dtype=bool)
    report = core_risk_decomposition(truth, est, flags)
    return report, truth, est


def risk_replication(mixture, n, bandwidth, rng, *, tight=False,
                     critical_points=None, core_specs=None,
                     flow_config=None, ms_config=None):
    """One replication of the benchmark pipeline; returns a RiskReport."""
    flow_config = flow_config or FlowConfig()
    if tight:
        flow_config = flow_config.tightened()
    sample = mixture.sample(n, rng)
    report, _, _ = cluster_and_score(mixture, sample, bandwidth,
                                     critical_points=critical_points,
                                     core_specs=core_specs,
                                     flow_config=flow_config, ms_config=ms_config)
    return report


# ---------------------------------------------------------------------------
# 2-d curved-basins study
# ---------------------------------------------------------------------------

def basins2d_mixture():
    """Documented stand-in for the 2-d bimodal density with curved basins.

    Two anisotropic components whose long axes are rotated against each other,
    which bends the basin boundary into an S shape while keeping both modes
    well defined at kernel bandwidth 1.
    """
    def rot(theta):
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]])

    def cov(theta, long_var, short_var):
        r = rot(theta)
        return r @ np.diag([long_var, short_var]) @ r.T

    means = np.array([[-2.6, -1.0], [2.6, 1.0]])
    covs = np.stack([cov(np.deg2rad(40.0), 2.2, 0.45),
                     cov(np.deg2rad(-40.0), 2.2, 0.45)])
    return GaussianMixture([0.5, 0.5], means, covs)


def tv_distance_mc(p_true, p_est, n_draws, rng):
    """Monte Carlo total variation distance via importance sampling from the truth.

    0.5 E_p |1 - q(X)/p(X)| estimates 0.5 * integral |p - q|; returns
    (estimate, standard error).
    """
    x = p_true.sample(int(n_draws), rng)
    ratio = np.abs(1.0 - p_est.density(x) / p_true.density(x))
    return float(0.5 * ratio.mean()), float(0.5 * ratio.std(ddof=1) / np.sqrt(n_draws))


@dataclass
class Basins2dReport:
    loss: float
    tv_distance: float
    tv_stderr: float
    n_modes_estimated: int
    n_modes_true: int
    core_loss: float | None
    core_fraction: float
    excluded: int
    misclustered: np.ndarray
    sample: np.ndarray = field(repr=False, default=None)
    true_label_values: np.ndarray = field(repr=False, default=None)
    est_label_values: np.ndarray = field(repr=False, default=None)
    modes: np.ndarray = field(repr=False, default=None)
    runtime_seconds: float = 0.0


def run_basins2d(cfg):
    """Sample the curved-basins density, cluster at the configured bandwidth,
    and score against the flow oracle, including the TV distance between the
    true density and the KDE."""
    t0 = time.perf_counter()
    mixture = cfg.mixture or basins2d_mixture()
    rng = substream(cfg.master_seed, STAGE_SAMPLE, 0, 0)
    sample = mixture.sample(cfg.n, rng)

    critical_points = find_critical_points(mixture, default_seeds(mixture, sample))
    core_specs = make_core_specs(mixture, critical_points, cfg.core_offset_fraction)
    report, truth, est = cluster_and_score(
        mixture, sample, cfg.bandwidth, critical_points=critical_points,
        core_specs=core_specs)

    kde = KernelDensityEstimate(sample, cfg.bandwidth)
    tv, tv_se = tv_distance_mc(mixture, kde, cfg.tv_draws,
                               substream(cfg.master_seed, STAGE_MC, 0, 0))

    mis = _misclustered_indices(truth.labels, est.labels)
    return Basins2dReport(
        loss=report.loss, tv_distance=tv, tv_stderr=tv_se,
        n_modes_estimated=len(est.mode_set), n_modes_true=len(truth.mode_set),
        core_loss=report.core_loss, core_fraction=report.core_fraction,
        excluded=report.excluded, misclustered=mis, sample=sample,
        true_label_values=truth.labels, est_label_values=est.labels,
        modes=est.mode_set.locations, runtime_seconds=time.perf_counter() - t0)


def _misclustered_indices(true_lab, est_lab):
    """Points involved in disagreeing pairs, via best-overlap label matching."""
    keep = (true_lab != UNRESOLVED) & (est_lab != UNRESOLVED)
    t, e = true_lab[keep], est_lab[keep]
    idx = np.flatnonzero(keep)
    bad = np.zeros(t.shape[0], dtype=bool)
    for lab in np.unique(e):
        members = e == lab
        counts = np.bincount(t[members])
        majority = counts.argmax()
        bad[members & (t != majority)] = True
    return idx[bad]


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def random_spd_covariances(k, dim, eig_low, eig_high, rng):
    """Random SPD matrices: uniform eigenvalues in range, Haar-ish eigenvectors."""
    covs = []
    for _ in range(k):
        eig = rng.uniform(eig_low, eig_high, dim)
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        q *= np.sign(np.diagonal(r))
        covs.append((q * eig) @ q.T)
    return np.stack(covs)


def highdim_mixture(cfg, n_index, rep):
    """Per-replication mixture: means separated by cfg.separation, random covariances."""
    rng = substream(cfg.master_seed, STAGE_MIXTURE, n_index, rep)
    half = 0.5 * cfg.separation
    means = np.zeros((2, cfg.dim))
    means[0, 0], means[1, 0] = -half, half
    covs = random_spd_covariances(2, cfg.dim, cfg.eig_low, cfg.eig_high, rng)
    return GaussianMixture([0.5, 0.5], means, covs)


def _highdim_rep_task(args):
    cfg, n_index, rep = args
    n = cfg.n_grid[n_index]
    t0 = time.perf_counter()
    mixture = highdim_mixture(cfg, n_index, rep)
    sample = mixture.sample(n, substream(cfg.master_seed, STAGE_SAMPLE, n_index, rep))
    seeds = np.vstack([mixture.means, mixture.means.mean(axis=0, keepdims=True), sample[:8]])
    critical_points = find_critical_points(mixture, seeds)
    core_specs = make_core_specs(mixture, critical_points, cfg.core_offset_fraction)
    truth = true_labels(mixture, sample, modes_of(critical_points),
                        critical_points=critical_points)
    ms_config = MeanShiftConfig(max_iter=2000)  # over-smoothed cells converge slowly
    records = []
    for h in cfg.h_grid:
        t1 = time.perf_counter()
        report, _, est = cluster_and_score(mixture, sample, h, core_specs=core_specs,
                                           truth=truth, ms_config=ms_config)
        records.append(ReplicationRecord(
            n=n, h=float(h), separation=cfg.separation, rep=rep, report=report,
            n_modes_estimated=len(est.mode_set),
            runtime_seconds=time.perf_counter() - t1))
    # attribute the shared truth computation to the replication's first cell
    overhead = (time.perf_counter() - t0) - sum(r.runtime_seconds for r in records)
    records[0].runtime_seconds += max(overhead, 0.0)
    return records


def separation_bandwidth(base, separation):
    """Bandwidth schedule for the separation sweep: base times the mixture's
    average per-coordinate spread sqrt(1 + separation^2/8).

    A fixed bandwidth cannot show the separation trend: one small enough to
    split the near-unimodal case over-fragments the well-separated one. The
    schedule is a fixed function of the experiment parameter, not data-driven
    selection.
    """
    return base * np.sqrt(1.0 + separation * separation / 8.0)


def _separation_rep_task(args):
    cfg, sep_index, rep = args
    sep = cfg.separations[sep_index]
    t0 = time.perf_counter()
    means = np.zeros((2, cfg.dim))
    means[0, 0], means[1, 0] = -0.5 * sep, 0.5 * sep
    mixture = spherical_mixture([0.5, 0.5], means, 1.0)
    n = cfg.n
    h = separation_bandwidth(cfg.bandwidth, sep)
    sample = mixture.sample(n, substream(cfg.master_seed, STAGE_SAMPLE, sep_index, rep))
    seeds = np.vstack([mixture.means, mixture.means.mean(axis=0, keepdims=True), sample[:8]])
    critical_points = find_critical_points(mixture, seeds)
    core_specs = make_core_specs(mixture, critical_points, cfg.core_offset_fraction)
    report, _, est = cluster_and_score(mixture, sample, h,
                                       critical_points=critical_points,
                                       core_specs=core_specs,
                                       ms_config=MeanShiftConfig(max_iter=2000))
    return [ReplicationRecord(n=n, h=float(h), separation=float(sep), rep=rep,
                              report=report, n_modes_estimated=len(est.mode_set),
                              runtime_seconds=time.perf_counter() - t0)]


def _run_tasks(task_fn, tasks, threads):
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(task_fn, tasks, chunksize=1))
    else:
        nested = [task_fn(t) for t in tasks]
    return [rec for group in nested for rec in group]


def _aggregate(records, unresolved_flag_fraction=0.10):
    cells = {}
    for rec in records:
        cells.setdefault((rec.n, rec.h, rec.separation), []).append(rec)
    rows = []
    for (n, h, sep), recs in sorted(cells.items()):
        losses = np.array([r.report.loss for r in recs])
        core_losses = [r.report.core_loss for r in recs if r.report.core_loss is not None]
        excluded = sum(r.report.excluded for r in recs)
        points = sum(r.report.n_points + r.report.excluded for r in recs)
        rows.append(SweepRow(
            n=n, h=h, separation=sep, replications=len(recs),
            mean_loss=float(losses.mean()),
            stderr=float(losses.std(ddof=1) / np.sqrt(len(recs))) if len(recs) > 1 else None,
            core_loss=float(np.mean(core_losses)) if core_losses else None,
            core_fraction=float(np.mean([r.report.core_fraction for r in recs])),
            excluded=excluded,
            flagged=bool(points and excluded / points > unresolved_flag_fraction),
            runtime_seconds=sum(r.runtime_seconds for r in recs)))
    return SweepResult(rows=rows, records=sorted(
        records, key=lambda r: (r.n, r.h, r.separation, r.rep)))


def run_highdim_sweep(cfg):
    """Replicated loss over the (n, h) grid for the high-dimensional mixture."""
    tasks = [(cfg, n_index, rep)
             for n_index in range(len(cfg.n_grid))
             for rep in range(cfg.replications)]
    records = _run_tasks(_highdim_rep_task, tasks, cfg.threads)
    return _aggregate(records)


def run_separation_sweep(cfg):
    """Replicated loss as the two components move apart (d=2, unit covariance).

    The kernel bandwidth follows :func:`separation_bandwidth` with
    ``cfg.bandwidth`` as the base (0.3 reproduces the benchmark trend).
    """
    tasks = [(cfg, sep_index, rep)
             for sep_index in range(len(cfg.separations))
             for rep in range(cfg.replications)]
    records = _run_tasks(_separation_rep_task, tasks, cfg.threads)
    return _aggregate(records)


# ---------------------------------------------------------------------------
# custom runs
# ---------------------------------------------------------------------------

@dataclass
class CustomReport:
    labels: np.ndarray
    modes: np.ndarray
    mode_densities: np.ndarray
    n_modes: int
    risk: RiskReport | None = None
    runtime_seconds: float = 0.0


def run_custom(cfg, data=None):
    """Cluster a dataset (or a fresh sample from cfg.mixture) at cfg.bandwidth.

    When a mixture is configured, the flow oracle supplies true labels and the
    report includes the risk; otherwise labels and modes only.
    """
    t0 = time.perf_counter()
    if data is None:
        if cfg.mixture is None:
            raise ValueError("custom run needs a dataset or a mixture")
        data = cfg.mixture.sample(cfg.n, substream(cfg.master_seed, STAGE_SAMPLE, 0, 0))
    est = run_mean_shift(KernelDensityEstimate(data, cfg.bandwidth), data)
    risk = None
    if cfg.mixture is not None:
        critical_points = find_critical_points(cfg.mixture, default_seeds(cfg.mixture, data))
        core_specs = make_core_specs(cfg.mixture, critical_points, cfg.core_offset_fraction)
        risk, _, _ = cluster_and_score(cfg.mixture, data, cfg.bandwidth,
                                       critical_points=critical_points,
                                       core_specs=core_specs)
    return CustomReport(labels=est.labels, modes=est.mode_set.locations,
                        mode_densities=est.mode_set.densities,
                        n_modes=len(est.mode_set), risk=risk,
                        runtime_seconds=time.perf_counter() - t0)
