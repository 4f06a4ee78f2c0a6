"""Ground-truth destinations by integrating the density ascent flow.

The flow through ``x`` solves ``x'(t) = grad p(x(t))``; its limit point is the
destination whose basin defines the true cluster of ``x``. Destination finding
integrates the log-density field ``grad p / p`` instead: it has the same flow
lines (a positive pointwise rescaling of the field only reparametrizes time)
but a density-independent magnitude, so tail points converge in O(1) time.
Anything time-dependent (flow positions at given t, perturbation bounds) uses
the raw field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ._validation import check_point, check_points
from .assignment import UNRESOLVED, ClusterAssignment, ModeSet

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class FlowConfig:
    """Integrator tolerances and termination thresholds.

    Tolerances are chosen so that label errors are far rarer than the
    statistical effects being measured; ``snap_tol`` is the radius within
    which a terminal point is identified with a known critical point.
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    grad_tol: float = 1e-9
    snap_tol: float = 1e-4
    # log-density gradient norm below which a non-mode endpoint counts as
    # stationary (boundary / saddle); scale-free, unlike grad_tol
    flat_tol: float = 1e-8
    max_field_evals: int = 1_000_000
    keep_path: bool = False

    def tightened(self, factor=0.5):
        return FlowConfig(rtol=self.rtol * factor, atol=self.atol * factor,
                          grad_tol=self.grad_tol * factor, snap_tol=self.snap_tol,
                          flat_tol=self.flat_tol * factor,
                          max_field_evals=self.max_field_evals, keep_path=self.keep_path)


@dataclass
class FlowResult:
    destination: np.ndarray
    dest_kind: str  # mode | saddle | minimum | unresolved
    terminal_gradient_norm: float
    n_field_evals: int
    path: list | None = None  # [(t, point), ...] in integration time


def classify_hessian(eigenvalues, tol=DEGENERACY_TOL):
    """mode / minimum / saddle by eigenvalue signs; 'degenerate' near zero."""
    eigenvalues = np.asarray(eigenvalues)
    if np.any(np.abs(eigenvalues) <= tol):
        return "degenerate"
    if np.all(eigenvalues < 0):
        return "mode"
    if np.all(eigenvalues > 0):
        return "minimum"
    return "saddle"


def _terminal_kind(model, x, critical_points, snap_tol):
    """Classify (and optionally snap) a converged endpoint."""
    if critical_points is not None and len(critical_points) > 0:
        locs = np.atleast_2d(np.asarray([getattr(c, "location", c) for c in critical_points], dtype=float))
        dists = np.linalg.norm(locs - x[None, :], axis=1)
        j = int(np.argmin(dists))
        if dists[j] < snap_tol:
            cp = critical_points[j]
            kind = getattr(cp, "kind", None)
            if kind is None:
                kind = classify_hessian(np.linalg.eigvalsh(model.hessian(locs[j])))
            return locs[j].copy(), kind if kind != "degenerate" else "unresolved"
    eig = np.linalg.eigvalsh(model.hessian(x))
    kind = classify_hessian(eig)
    return x, kind if kind != "degenerate" else "unresolved"


def integrate_flow(model, x, config=None, critical_points=None):
    """Follow the ascent flow from ``x`` until the gradient vanishes.

    Integrates the log-density field in geometrically growing time chunks and
    stops once the raw gradient norm clears ``grad_tol`` or the evaluation
    budget runs out. The endpoint is snapped to the nearest known critical
    point within ``snap_tol`` when a list is supplied.
    """
    config = config or FlowConfig()
    x = check_point(x, dim=model.dim)
    path = [(0.0, x.copy())] if config.keep_path else None

    gnorm = float(np.linalg.norm(model.gradient(x)))
    if gnorm < config.grad_tol:
        dest, kind = _terminal_kind(model, x, critical_points, config.snap_tol)
        return FlowResult(dest, kind, gnorm, 0, path)

    def field(t, y):
        return model.score(y)

    current = x.copy()
    evals = 0
    elapsed = 0.0
    horizon = 4.0
    for _ in range(48):
        if evals >= config.max_field_evals:
            break
        sol = solve_ivp(field, (0.0, horizon), current,
                        rtol=config.rtol, atol=config.atol, dense_output=config.keep_path)
        evals += sol.nfev
        if not sol.success:
            return FlowResult(current, "unresolved", gnorm, evals, path)
        if config.keep_path:
            for t, col in zip(sol.t[1:], sol.y[:, 1:].T):
                path.append((elapsed + t, col.copy()))
        moved = float(np.linalg.norm(sol.y[:, -1] - current))
        current = sol.y[:, -1]
        elapsed += horizon
        gnorm = float(np.linalg.norm(model.gradient(current)))
        if gnorm < config.grad_tol:
            dest, kind = _terminal_kind(model, current, critical_points, config.snap_tol)
            return FlowResult(dest, kind, gnorm, evals, path)
        if moved < 1e-15 * (1.0 + np.linalg.norm(current)):
            break  # stalled on a plateau the tolerances cannot resolve
        horizon *= 4.0
    return FlowResult(current, "unresolved", gnorm, evals, path)


def flow_at_times(model, x, times, config=None):
    """Positions of the raw-time ascent flow ``x'(t) = grad p`` at given times.

    Returns an array of shape (len(times), d). Times must be non-negative and
    increasing.
    """
    config = config or FlowConfig()
    x = check_point(x, dim=model.dim)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be 1-d, non-negative, strictly increasing")

    def field(t, y):
        return model.gradient(y)

    t_end = float(times[-1])
    if t_end == 0.0:
        return np.tile(x, (len(times), 1))
    sol = solve_ivp(field, (0.0, t_end), x, t_eval=times,
                    rtol=config.rtol, atol=config.atol)
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    return sol.y.T


def _mode_locations(mode_set):
    if isinstance(mode_set, ModeSet):
        return mode_set.locations
    if isinstance(mode_set, np.ndarray):
        return np.atleast_2d(mode_set)
    locs = [getattr(m, "location", m) for m in mode_set]
    return np.atleast_2d(np.asarray(locs, dtype=float))


def true_labels(model, points, mode_set, config=None, critical_points=None):
    """Label points by the mode their ascent flow converges to.

    All points are integrated together as one stacked system (the flow is
    autonomous, so per-point clocks are interchangeable); a point leaves the
    active set once it is within ``snap_tol`` of a mode or its gradient
    vanishes. Points that terminate away from every known mode, or at a
    non-mode critical point (basin boundaries, a measure-zero set), or that
    exhaust the evaluation budget are flagged ``UNRESOLVED`` rather than
    silently assigned.
    """
    config = config or FlowConfig()
    X = check_points(points, dim=model.dim, name="points")
    modes = _mode_locations(mode_set)
    if modes.shape[0] == 0:
        raise ValueError("mode_set is empty")
    mode_dens = np.atleast_1d(model.density(modes))
    result_modes = ModeSet(modes, mode_dens)

    n = X.shape[0]
    labels = np.full(n, UNRESOLVED, dtype=int)
    done = np.zeros(n, dtype=bool)
    evals = np.zeros(n, dtype=int)
    current = X.copy()

    def settle(idx):
        """Try to finalize the given point indices; return mask of settled."""
        pos = current[idx]
        near_mode, dist = result_modes.nearest(pos)
        snapped = dist < config.snap_tol
        labels[idx[snapped]] = near_mode[snapped]
        # stationary for the integrated field but not at a mode: a boundary
        # point (flows to a saddle or minimum), flagged rather than assigned
        score_norm = np.linalg.norm(model.score(pos), axis=1)
        flat = ~snapped & (score_norm < config.flat_tol)
        settled = snapped | flat
        return settled

    active = np.flatnonzero(~done)
    settled = settle(active)
    done[active[settled]] = True

    horizon = 4.0
    for _ in range(48):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        d = model.dim

        def field(t, y):
            return model.score(y.reshape(-1, d)).ravel()

        sol = solve_ivp(field, (0.0, horizon), current[active].ravel(),
                        rtol=config.rtol, atol=config.atol)
        evals[active] += sol.nfev
        if not sol.success:
            done[active] = True
            break
        current[active] = sol.y[:, -1].reshape(-1, d)
        settled = settle(active)
        done[active[settled]] = True
        over = evals[active] > config.max_field_evals
        done[active[over & ~settled]] = True
        horizon = min(horizon * 4.0, 512.0)

    return ClusterAssignment(labels=labels, mode_set=result_modes,
                             converged=labels != UNRESOLVED, iterations=evals)
