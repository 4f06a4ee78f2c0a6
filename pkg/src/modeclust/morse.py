"""Critical-point analysis of a density landscape.

Finds and classifies the critical points of a density model, estimates the
boundary density level of each basin, decides cluster-core membership, and
summarizes landscape constants (gradient bound, Hessian bound, critical-point
separation) over a probe set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import check_points
from .assignment import UNRESOLVED, ModeSet
from .density import GaussianMixture, KernelDensityEstimate
from .flow import DEGENERACY_TOL, FlowConfig, classify_hessian, true_labels
from .mean_shift import MeanShiftConfig, run_mean_shift


@dataclass(frozen=True)
class CriticalPoint:
    """A root of the gradient, classified by its Hessian eigenvalues.

    ``morse_index`` counts negative eigenvalues: d for a mode, 0 for a
    minimum. ``degenerate`` flags an eigenvalue within 1e-10 of zero, i.e. a
    point where the Morse assumption fails.
    """

    location: np.ndarray
    value: float
    morse_index: int
    hessian_eigenvalues: np.ndarray
    degenerate: bool = False

    @property
    def kind(self):
        d = self.location.shape[0]
        if self.degenerate:
            return "degenerate"
        if self.morse_index == d:
            return "mode"
        if self.morse_index == 0:
            return "minimum"
        return "saddle"


def default_seeds(model, data=None, grid_per_axis=9, pad=2.0, max_data_seeds=200):
    """Seed set for the critical-point search: data, means, and a small grid."""
    parts = []
    if isinstance(model, GaussianMixture):
        parts.append(model.means)
    if isinstance(model, KernelDensityEstimate) and data is None:
        data = model.samples
    if data is not None and np.size(data):
        data = check_points(data, dim=model.dim)
        if data.shape[0] > max_data_seeds:
            stride = data.shape[0] // max_data_seeds + 1
            data = data[::stride]
        parts.append(data)
    if not parts:
        raise ValueError("need data or a mixture to seed the search")
    anchors = np.vstack(parts)
    if model.dim <= 3:
        lo = anchors.min(axis=0) - pad
        hi = anchors.max(axis=0) + pad
        axes = [np.linspace(lo[i], hi[i], grid_per_axis) for i in range(model.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        parts.append(np.stack([g.ravel() for g in mesh], axis=1))
    return np.vstack(parts)


def find_critical_points(model, seeds=None, *, newton_tol=1e-12, max_iter=80,
                         dedup_tol=1e-6, density_floor_ratio=1e-9,
                         cross_check_mean_shift=False):
    """Multi-start damped Newton search for gradient roots.

    All seeds iterate in parallel on the log-density gradient (same roots,
    far larger Newton basins) with a backtracking line search on its norm.
    Roots failing the gradient-norm acceptance or a relative density floor
    are dropped, survivors are deduplicated at ``dedup_tol`` and classified
    by Hessian eigenvalue signs. Seeds that diverge are skipped.

    With ``cross_check_mean_shift=True`` and a KDE model, modes reached by
    mean shift from the same seeds are verified against (and merged into)
    the Newton roots.
    """
    if seeds is None:
        seeds = default_seeds(model)
    Y = check_points(seeds, dim=model.dim, name="seeds").copy()
    m, d = Y.shape
    active = np.ones(m, dtype=bool)
    ridge = np.eye(d)

    def score_and_jacobian(pts):
        # Newton runs on the log-density gradient: same roots as the raw
        # gradient, but its norm grows away from the components, so the line
        # search cannot drift into flat tails
        p, g, H = model.evaluate(pts)
        p = np.maximum(p, 1e-300)
        s = g / p[:, None]
        J = H / p[:, None, None] - np.einsum("mi,mj->mij", s, s)
        return s, J

    def score_norm(pts):
        return np.linalg.norm(model.score(pts), axis=1)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        s, J = score_and_jacobian(Y[idx])
        snorm = np.linalg.norm(s, axis=1)
        hit = snorm < newton_tol
        active[idx[hit]] = False
        idx = idx[~hit]
        if idx.size == 0:
            break
        s, J, snorm = s[~hit], J[~hit], snorm[~hit]
        try:
            delta = -np.linalg.solve(J, s[..., None])[..., 0]
        except np.linalg.LinAlgError:
            scale = np.abs(J).max(axis=(1, 2), keepdims=True) + 1e-300
            delta = -np.linalg.solve(J + 1e-9 * scale * ridge, s[..., None])[..., 0]

        alpha = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(30):
            if not pending.any():
                break
            trial = Y[idx[pending]] + alpha[pending, None] * delta[pending]
            str_ = score_norm(trial)
            ok = str_ <= (1.0 - 1e-4 * alpha[pending]) * snorm[pending]
            sel = np.flatnonzero(pending)
            Y[idx[sel[ok]]] = trial[ok]
            pending[sel[ok]] = False
            alpha[sel[~ok]] *= 0.5
        # seeds that cannot make progress are abandoned
        active[idx[pending]] = False
        Y[idx[pending]] = np.nan

    roots = Y[~np.isnan(Y).any(axis=1) & ~active]
    if roots.shape[0] == 0:
        roots = np.empty((0, d))
    else:
        gn = np.linalg.norm(model.gradient(roots), axis=1)
        sn = np.linalg.norm(model.score(roots), axis=1)
        roots = roots[(sn < max(newton_tol * 10, 1e-11)) & (gn < 1e-9)]

    points = _classify_roots(model, roots, dedup_tol, density_floor_ratio)

    if cross_check_mean_shift and isinstance(model, KernelDensityEstimate):
        assign = run_mean_shift(model, seeds, MeanShiftConfig())
        extra = []
        mode_locs = [c.location for c in points if c.kind == "mode"]
        for loc in assign.mode_set.locations:
            dist = min((np.linalg.norm(loc - q) for q in mode_locs), default=np.inf)
            if dist > dedup_tol * 10:
                extra.append(loc)
        if extra:
            refined = find_critical_points(model, np.asarray(extra), newton_tol=newton_tol,
                                           max_iter=max_iter, dedup_tol=dedup_tol,
                                           density_floor_ratio=density_floor_ratio)
            merged = {tuple(np.round(c.location, 8)): c for c in points}
            for c in refined:
                merged.setdefault(tuple(np.round(c.location, 8)), c)
            points = sorted(merged.values(), key=lambda c: -c.value)
    return points


def _classify_roots(model, roots, dedup_tol, density_floor_ratio):
    if roots.shape[0] == 0:
        return []
    dens = np.atleast_1d(model.density(roots))
    keep = dens >= density_floor_ratio * dens.max()
    roots, dens = roots[keep], dens[keep]
    if roots.shape[0] == 0:
        return []
    if roots.shape[0] == 1:
        groups = np.zeros(1, dtype=int)
    else:
        groups = fcluster(linkage(pdist(roots), method="single"),
                          t=dedup_tol, criterion="distance") - 1
    points = []
    for g in range(groups.max() + 1):
        members = np.flatnonzero(groups == g)
        gn = np.linalg.norm(model.gradient(roots[members]), axis=1)
        best = members[np.argmin(gn)]
        loc = roots[best]
        eig = np.linalg.eigvalsh(model.hessian(loc))
        points.append(CriticalPoint(
            location=loc,
            value=float(dens[best]),
            morse_index=int(np.sum(eig < 0)),
            hessian_eigenvalues=eig,
            degenerate=bool(np.any(np.abs(eig) <= DEGENERACY_TOL)),
        ))
    points.sort(key=lambda c: -c.value)
    return points


def modes_of(critical_points):
    """ModeSet view of the modes among a critical-point list."""
    modes = [c for c in critical_points if c.kind == "mode"]
    if not modes:
        raise ValueError("no modes among the critical points")
    locs = np.stack([c.location for c in modes])
    dens = np.array([c.value for c in modes])
    order = np.argsort(-dens)
    return ModeSet(locs[order], dens[order])


# ---------------------------------------------------------------------------
# boundary level and cluster cores
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoreSpec:
    """Core membership rule for one cluster: density >= boundary level + offset."""

    cluster_index: int
    boundary_density: float
    offset: float

    def __post_init__(self):
        if self.boundary_density < 0 or self.offset < 0:
            raise ValueError("boundary_density and offset must be >= 0")


def core_membership(model, spec, x, label):
    """1 iff the point carries the spec's cluster label and clears its density bar."""
    if int(label) != spec.cluster_index:
        return False
    return bool(model.density(np.asarray(x, dtype=float)) >= spec.boundary_density + spec.offset)


def core_flags(model, points, labels, specs):
    """Vectorized core membership for a batch of labeled points."""
    points = check_points(points, dim=model.dim)
    labels = np.asarray(labels)
    dens = np.atleast_1d(model.density(points))
    flags = np.zeros(points.shape[0], dtype=bool)
    for spec in specs:
        mask = labels == spec.cluster_index
        flags[mask] = dens[mask] >= spec.boundary_density + spec.offset
    return flags


@dataclass
class BoundaryLevel:
    """Boundary density estimate for one basin.

    ``value`` is the larger of the two routes: the density maximum over
    non-mode critical points on the basin's closure, and (d <= 2) the density
    maximum over grid points straddling a label change.
    """

    value: float
    critical_estimate: float
    grid_estimate: float | None
    no_boundary: bool = False
    grid_disagrees: bool = False


def label_grid(model, mode_set, lo, hi, resolution=64, flow_config=None):
    """Flow-label a regular grid; returns (grid points, labels, grid shape)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(model.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    assign = true_labels(model, pts, mode_set, config=flow_config)
    return pts, assign.labels, tuple(len(a) for a in axes)


def grid_boundary_points(points, labels, shape, mode_index=None):
    """Midpoints of axis-neighbor grid pairs with differing labels.

    With ``mode_index`` given, only pairs touching that basin are kept.
    """
    lab = labels.reshape(shape)
    pts = points.reshape(shape + (-1,))
    mids = []
    d = len(shape)
    for axis in range(d):
        sl_a = tuple(slice(0, -1) if k == axis else slice(None) for k in range(d))
        sl_b = tuple(slice(1, None) if k == axis else slice(None) for k in range(d))
        differ = lab[sl_a] != lab[sl_b]
        if mode_index is not None:
            differ &= (lab[sl_a] == mode_index) | (lab[sl_b] == mode_index)
        if differ.any():
            mids.append(0.5 * (pts[sl_a][differ] + pts[sl_b][differ]))
    if not mids:
        return np.empty((0, points.shape[1]))
    return np.vstack(mids)


def boundary_level(model, critical_points, mode_index, *, flow_config=None,
                   grid_resolution=64, grid_pad=2.0):
    """Estimate the boundary density level of one basin.

    Non-mode critical points are attributed to the basins their unstable
    directions ascend into (probed by short flow integrations); the grid
    route cross-checks in d <= 2. A unimodal landscape returns 0, flagged.
    """
    flow_config = flow_config or FlowConfig()
    mode_set = modes_of(critical_points)
    others = [c for c in critical_points if c.kind != "mode"]
    target_loc = None
    for c in critical_points:
        if c.kind == "mode":
            idx, dist = mode_set.nearest(c.location[None, :])
            if idx[0] == mode_index and dist[0] < 1e-9:
                target_loc = c.location
    if target_loc is None and mode_index < len(mode_set):
        target_loc = mode_set.locations[mode_index]

    if not others:
        return BoundaryLevel(0.0, 0.0, None, no_boundary=True)

    # route 1: flows launched just off each non-mode critical point reveal
    # which basins it borders
    probes, owners = [], []
    for ci, c in enumerate(others):
        scale = 1e-3 * (1.0 + np.linalg.norm(c.location))
        eig, vec = np.linalg.eigh(model.hessian(c.location))
        up = np.flatnonzero(eig > DEGENERACY_TOL)
        dirs = vec[:, up].T if up.size else vec.T
        for v in dirs:
            probes.append(c.location + scale * v)
            probes.append(c.location - scale * v)
            owners.extend([ci, ci])
    assign = true_labels(model, np.asarray(probes), mode_set, config=flow_config)
    critical_estimate = 0.0
    for ci, c in enumerate(others):
        reached = {assign.labels[k] for k in range(len(owners)) if owners[k] == ci}
        if mode_index in reached:
            critical_estimate = max(critical_estimate, c.value)

    grid_estimate = None
    if model.dim <= 2:
        locs = np.vstack([c.location for c in critical_points])
        lo = locs.min(axis=0) - grid_pad
        hi = locs.max(axis=0) + grid_pad
        pts, labels, shape = label_grid(model, mode_set, lo, hi, grid_resolution, flow_config)
        mids = grid_boundary_points(pts, labels, shape, mode_index=mode_index)
        grid_estimate = float(np.max(model.density(mids))) if mids.size else 0.0

    estimates = [critical_estimate] + ([grid_estimate] if grid_estimate is not None else [])
    value = max(estimates)
    no_boundary = value == 0.0
    grid_disagrees = False
    if grid_estimate is not None and critical_estimate > 0:
        resolution_scale = abs(grid_estimate - critical_estimate)
        grid_disagrees = resolution_scale > 0.2 * max(critical_estimate, 1e-12)
    return BoundaryLevel(value, critical_estimate, grid_estimate,
                         no_boundary=no_boundary, grid_disagrees=grid_disagrees)


# ---------------------------------------------------------------------------
# landscape statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandscapeStats:
    """Probe-set bounds: sup gradient norm, sup Hessian spectral norm, and the
    minimum pairwise distance among critical points (inf when fewer than 2)."""

    max_gradient_norm: float
    max_hessian_norm: float
    min_critical_separation: float


def landscape_stats(model, probe, critical_points=()):
    probe = check_points(probe, dim=model.dim, name="probe")
    _, g, H = model.evaluate(probe)
    max_grad = float(np.max(np.linalg.norm(g, axis=1)))
    max_hess = float(np.max(np.abs(np.linalg.eigvalsh(H))))
    locs = [c.location for c in critical_points]
    if len(locs) < 2:
        sep = np.inf
    else:
        sep = float(np.min(pdist(np.stack(locs))))
    return LandscapeStats(max_grad, max_hess, sep)


# ---------------------------------------------------------------------------
# estimator facade
# ---------------------------------------------------------------------------

class GradientFlowClustering(ClusterMixin, BaseEstimator):
    """Ground-truth clustering under a known density model, sklearn style.

    ``fit(X)`` locates the model's critical points (seeded by X and the model
    means) and labels every point by the mode its ascent flow reaches.
    ``predict`` labels new points under the same fitted mode set. Points on
    basin boundaries come back as ``-1``.
    """

    def __init__(self, model=None, rtol=1e-8, atol=1e-10, grad_tol=1e-9,
                 snap_tol=1e-4, max_field_evals=1_000_000):
        self.model = model
        self.rtol = rtol
        self.atol = atol
        self.grad_tol = grad_tol
        self.snap_tol = snap_tol
        self.max_field_evals = max_field_evals

    def _flow_config(self):
        return FlowConfig(rtol=self.rtol, atol=self.atol, grad_tol=self.grad_tol,
                          snap_tol=self.snap_tol, max_field_evals=self.max_field_evals)

    def fit(self, X, y=None):
        if self.model is None:
            raise ValueError("GradientFlowClustering requires a density model")
        X = check_points(X, dim=self.model.dim, name="X")
        self.critical_points_ = find_critical_points(
            self.model, default_seeds(self.model, X))
        self.mode_set_ = modes_of(self.critical_points_)
        self.modes_ = self.mode_set_.locations
        assign = true_labels(self.model, X, self.mode_set_, config=self._flow_config(),
                             critical_points=self.critical_points_)
        self.assignment_ = assign
        self.labels_ = assign.labels
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "mode_set_"):
            raise ValueError("GradientFlowClustering instance is not fitted yet; call fit first")
        X = check_points(X, dim=self.model.dim, name="X")
        assign = true_labels(self.model, X, self.mode_set_, config=self._flow_config(),
                             critical_points=self.critical_points_)
        return assign.labels
