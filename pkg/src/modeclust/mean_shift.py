"""Mean-shift mode seeking under a Gaussian kernel density estimate.

Seeds move to the kernel-weighted mean of the samples until the step length
falls below tolerance; converged endpoints are merged by single linkage into
a mode set and every seed gets a mode label. For the Gaussian kernel one
update satisfies ``step(x) - x = h^2 * grad(x) / density(x)``, so small steps
certify small gradients.

The module exposes the functional core (:func:`mean_shift_step`,
:func:`run_mean_shift`) plus :class:`KernelMeanShift`, an sklearn-style
estimator wrapping it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import check_points, check_positive
from .assignment import UNRESOLVED, ClusterAssignment, ModeSet
from .density import KernelDensityEstimate


@dataclass(frozen=True)
class MeanShiftConfig:
    """Stopping and merging parameters of the iteration.

    ``merge_tol=None`` resolves to ``0.1 * bandwidth`` at run time: distinct
    converged iterates differ by O(step_tol) in the clean case, while 0.1 h is
    the resolution at which the estimator can support separate modes.
    """

    max_iter: int = 500
    step_tol: float = 1e-7
    merge_tol: float | None = None
    grad_tol: float = 1e-8
    keep_paths: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        check_positive(self.step_tol, "step_tol")
        check_positive(self.grad_tol, "grad_tol")
        if self.merge_tol is not None:
            check_positive(self.merge_tol, "merge_tol")

    def resolved_merge_tol(self, bandwidth):
        return self.merge_tol if self.merge_tol is not None else 0.1 * float(bandwidth)


def mean_shift_step(kde, x):
    """One mean-shift update: kernel-weighted mean of the samples at ``x``.

    Accepts a single point or a batch. Points whose kernel weights all
    underflow are returned unchanged.
    """
    moved, _ = kde.kernel_weighted_mean(x)
    return moved


def run_mean_shift(kde, seeds=None, config=None):
    """Iterate seeds to KDE modes and label them.

    Parameters
    ----------
    kde : KernelDensityEstimate
    seeds : array-like (m, d), optional
        Defaults to the KDE's own samples.
    config : MeanShiftConfig, optional

    Returns
    -------
    ClusterAssignment
        Non-converged seeds (iteration budget or kernel underflow) are labeled
        by the nearest mode but flagged ``converged=False``; with an empty
        mode set they are ``UNRESOLVED``.
    """
    if not isinstance(kde, KernelDensityEstimate):
        raise ValueError("run_mean_shift operates on a KernelDensityEstimate")
    config = config or MeanShiftConfig()
    seeds = kde.samples if seeds is None else check_points(seeds, dim=kde.dim, name="seeds")
    m = seeds.shape[0]

    current = seeds.copy()
    active = np.ones(m, dtype=bool)
    dead = np.zeros(m, dtype=bool)  # underflowed: never converged
    iterations = np.zeros(m, dtype=int)
    paths = [[seeds[i].copy()] for i in range(m)] if config.keep_paths else None

    for _ in range(config.max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        moved, underflow = kde.kernel_weighted_mean(current[idx])
        step_len = np.linalg.norm(moved - current[idx], axis=1)
        current[idx] = moved
        iterations[idx] += 1
        if config.keep_paths:
            for row, i in enumerate(idx):
                paths[i].append(moved[row].copy())
        dead[idx[underflow]] = True
        active[idx[underflow]] = False
        active[idx[step_len < config.step_tol]] = False

    converged = ~active & ~dead

    merge_tol = config.resolved_merge_tol(kde.bandwidth)
    if converged.any() or dead.all():
        mode_set, endpoint_mode = _merge_modes(kde, current[converged], merge_tol, config)
        labels = np.full(m, UNRESOLVED, dtype=int)
        labels[converged] = endpoint_mode
    else:
        # iteration budget exhausted everywhere (heavily over-smoothed KDEs
        # converge slowly): merge the near-converged endpoints so the caller
        # still gets labels, but leave every seed flagged non-converged
        mode_set, endpoint_mode = _merge_modes(kde, current[~dead], merge_tol, config)
        labels = np.full(m, UNRESOLVED, dtype=int)
        labels[~dead] = endpoint_mode
    not_conv = labels == UNRESOLVED
    if not_conv.any() and len(mode_set) > 0:
        nearest, _ = mode_set.nearest(current[not_conv])
        labels[not_conv] = nearest

    return ClusterAssignment(labels=labels, mode_set=mode_set, converged=converged,
                             iterations=iterations, trajectories=paths)


def _merge_modes(kde, endpoints, merge_tol, config):
    """Single-linkage merge of converged endpoints; returns (ModeSet, labels)."""
    if endpoints.shape[0] == 0:
        return ModeSet(np.empty((0, kde.dim)), np.empty(0)), np.empty(0, dtype=int)
    if endpoints.shape[0] == 1:
        groups = np.zeros(1, dtype=int)
    else:
        link = linkage(pdist(endpoints), method="single")
        groups = fcluster(link, t=merge_tol, criterion="distance") - 1

    n_groups = groups.max() + 1
    dens = kde.density(endpoints)
    reps = np.empty((n_groups, kde.dim))
    rep_dens = np.empty(n_groups)
    for g in range(n_groups):
        members = np.flatnonzero(groups == g)
        best = members[np.argmax(dens[members])]
        loc, val = _polish_mode(kde, endpoints[best], config.grad_tol)
        reps[g] = loc
        rep_dens[g] = val

    # polishing can draw near-duplicate representatives together; fold them
    if n_groups > 1:
        link = linkage(pdist(reps), method="single")
        regroup = fcluster(link, t=merge_tol, criterion="distance") - 1
        if regroup.max() + 1 < n_groups:
            keep = []
            remap = np.empty(n_groups, dtype=int)
            for g2 in range(regroup.max() + 1):
                members = np.flatnonzero(regroup == g2)
                best = members[np.argmax(rep_dens[members])]
                remap[members] = len(keep)
                keep.append(best)
            reps, rep_dens = reps[keep], rep_dens[keep]
            groups = remap[groups]

    order = np.argsort(-rep_dens)  # highest-density mode first, deterministic
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return ModeSet(reps[order], rep_dens[order]), rank[groups]


def _polish_mode(kde, x, grad_tol, max_extra=200):
    """Extra updates until the gradient norm clears ``grad_tol``."""
    x = x.copy()
    for _ in range(max_extra):
        p, g = kde.density_and_gradient(x)
        if np.linalg.norm(g) < grad_tol:
            return x, p
        moved, under = kde.kernel_weighted_mean(x)
        if under or not np.all(np.isfinite(moved)):
            break
        x = moved
    p = kde.density(x)
    return x, p


class KernelMeanShift(ClusterMixin, BaseEstimator):
    """Mean-shift clustering with a Gaussian kernel, sklearn style.

    ``fit(X)`` builds the KDE on X, iterates every sample to its mode, and
    stores the mode set and labels. ``predict(X)`` iterates new points under
    the fitted KDE and maps them onto the fitted modes.

    Attributes (after fit)
    ----------------------
    kde_ : KernelDensityEstimate
    modes_ : ndarray (k, d)
    mode_densities_ : ndarray (k,)
    labels_ : ndarray (n,)
    converged_ : ndarray (n,) bool
    assignment_ : ClusterAssignment
    """

    def __init__(self, bandwidth=1.0, max_iter=500, step_tol=1e-7,
                 merge_tol=None, grad_tol=1e-8, keep_paths=False):
        self.bandwidth = bandwidth
        self.max_iter = max_iter
        self.step_tol = step_tol
        self.merge_tol = merge_tol
        self.grad_tol = grad_tol
        self.keep_paths = keep_paths

    def _config(self):
        return MeanShiftConfig(max_iter=self.max_iter, step_tol=self.step_tol,
                               merge_tol=self.merge_tol, grad_tol=self.grad_tol,
                               keep_paths=self.keep_paths)

    def fit(self, X, y=None):
        X = check_points(X, name="X")
        self.kde_ = KernelDensityEstimate(X, self.bandwidth)
        self.assignment_ = run_mean_shift(self.kde_, X, self._config())
        self.labels_ = self.assignment_.labels
        self.converged_ = self.assignment_.converged
        self.modes_ = self.assignment_.mode_set.locations
        self.mode_densities_ = self.assignment_.mode_set.densities
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "kde_"):
            raise ValueError("KernelMeanShift instance is not fitted yet; call fit first")
        X = check_points(X, dim=self.kde_.dim, name="X")
        assign = run_mean_shift(self.kde_, X, self._config())
        if len(assign.mode_set) == 0:
            return assign.labels
        # map this run's modes onto the fitted mode set
        fitted = ModeSet(self.modes_, self.mode_densities_)
        mode_map, _ = fitted.nearest(assign.mode_set.locations)
        labels = assign.labels.copy()
        ok = labels != UNRESOLVED
        labels[ok] = mode_map[labels[ok]]
        return labels
