"""Shared containers for cluster assignments.

Both the mean-shift estimator and the gradient-flow oracle produce a
:class:`ClusterAssignment`: per-point mode labels plus the mode set itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNRESOLVED = -1


@dataclass(frozen=True)
class ModeSet:
    """Distinct modes with their density values under the producing model."""

    locations: np.ndarray  # (k, d)
    densities: np.ndarray  # (k,)

    def __post_init__(self):
        object.__setattr__(self, "locations", np.atleast_2d(np.asarray(self.locations, dtype=float)))
        object.__setattr__(self, "densities", np.asarray(self.densities, dtype=float))

    def __len__(self):
        return self.locations.shape[0]

    def nearest(self, points):
        """Index of the nearest mode and its distance, per query point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((points[:, None, :] - self.locations[None, :, :]) ** 2).sum(axis=2)
        idx = d2.argmin(axis=1)
        return idx, np.sqrt(d2[np.arange(points.shape[0]), idx])


@dataclass
class ClusterAssignment:
    """Per-point mode labels plus the producing mode set.

    ``labels[i]`` indexes ``mode_set``; ``UNRESOLVED`` marks points without a
    trustworthy destination. ``converged`` is False for such points (and for
    mean-shift seeds that were assigned to the nearest mode as a fallback).
    """

    labels: np.ndarray          # (n,) int
    mode_set: ModeSet
    converged: np.ndarray       # (n,) bool
    iterations: np.ndarray      # (n,) int; field evaluations for flow results
    trajectories: list | None = field(default=None, repr=False)

    @property
    def n_points(self):
        return self.labels.shape[0]

    @property
    def n_modes(self):
        return len(self.mode_set)

    @property
    def n_unresolved(self):
        return int(np.sum(self.labels == UNRESOLVED))

    @property
    def resolved(self):
        return self.labels != UNRESOLVED


def same_cluster(assignment, i, j):
    """1 if points i and j share a mode, 0 if not, None if either is unresolved."""
    li, lj = assignment.labels[int(i)], assignment.labels[int(j)]
    if li == UNRESOLVED or lj == UNRESOLVED:
        return None
    return int(li == lj)
