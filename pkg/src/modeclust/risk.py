"""Pairwise clustering loss and its core/non-core decomposition.

The loss is the fraction of unordered point pairs whose co-membership differs
between two labelings (one minus the Rand index). Labels are arbitrary
identifiers; only co-membership matters. Points labeled ``UNRESOLVED`` are
excluded pairwise, with counts surfaced in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_labels
from .assignment import UNRESOLVED, ClusterAssignment
from .streams import STAGE_SAMPLE, substream


def _resolved_pair_mask(true_labels, est_labels):
    return (true_labels != UNRESOLVED) & (est_labels != UNRESOLVED)


def _contingency_loss(true_labels, est_labels):
    """Loss from the contingency table in O(n + K*K') — exact, no floats until the end."""
    n = true_labels.shape[0]
    if n < 2:
        raise ValueError("pairwise loss needs at least 2 resolved points")
    _, ti = np.unique(true_labels, return_inverse=True)
    _, ei = np.unique(est_labels, return_inverse=True)
    k_t, k_e = ti.max() + 1, ei.max() + 1
    table = np.zeros((k_t, k_e), dtype=np.int64)
    np.add.at(table, (ti, ei), 1)

    def pairs2(counts):
        counts = counts.astype(np.int64)
        return int(np.sum(counts * (counts - 1) // 2))

    same_both = pairs2(table.ravel())
    same_true = pairs2(table.sum(axis=1))
    same_est = pairs2(table.sum(axis=0))
    total = n * (n - 1) // 2
    disagreements = same_true + same_est - 2 * same_both
    return disagreements / total, total


def pairwise_loss(true_labels, est_labels):
    """Fraction of unordered pairs on which co-membership disagrees.

    Unresolved points are dropped before pairing; see
    :func:`core_risk_decomposition` for the accounted version.
    """
    true_labels = check_labels(np.asarray(true_labels))
    est_labels = check_labels(np.asarray(est_labels), n=true_labels.shape[0])
    keep = _resolved_pair_mask(true_labels, est_labels)
    loss, _ = _contingency_loss(true_labels[keep], est_labels[keep])
    return loss


def pairwise_loss_brute(true_labels, est_labels):
    """O(n^2) pair enumeration; the independent oracle for the fast path."""
    true_labels = np.asarray(true_labels)
    est_labels = np.asarray(est_labels)
    keep = _resolved_pair_mask(true_labels, est_labels)
    t, e = true_labels[keep], est_labels[keep]
    n = t.shape[0]
    if n < 2:
        raise ValueError("pairwise loss needs at least 2 resolved points")
    disagree = 0
    for i in range(n - 1):
        same_t = t[i + 1:] == t[i]
        same_e = e[i + 1:] == e[i]
        disagree += int(np.sum(same_t != same_e))
    return disagree / (n * (n - 1) // 2)


def rand_index(true_labels, est_labels):
    return 1.0 - pairwise_loss(true_labels, est_labels)


@dataclass
class RiskReport:
    """Loss statistics for one clustering comparison.

    ``core_loss`` is the loss restricted to pairs with both points inside
    cluster cores; it is None when no such pair exists.
    """

    loss: float
    n_points: int
    n_pairs: int
    core_loss: float | None = None
    core_fraction: float = 0.0
    excluded: int = 0

    @property
    def rand_index(self):
        return 1.0 - self.loss

    def row(self):
        return {
            "loss": self.loss, "rand_index": self.rand_index,
            "n_points": self.n_points, "n_pairs": self.n_pairs,
            "core_loss": self.core_loss, "core_fraction": self.core_fraction,
            "excluded": self.excluded,
        }


def _labels_of(assignment):
    if isinstance(assignment, ClusterAssignment):
        return assignment.labels
    return check_labels(np.asarray(assignment))


def core_risk_decomposition(true_assign, est_assign, core_flags):
    """Overall loss plus its restriction to core-core pairs.

    Supports the empirical picture that the loss over the cores is ~0 while
    the overall loss is driven by points outside them.
    """
    t = _labels_of(true_assign)
    e = _labels_of(est_assign)
    core_flags = np.asarray(core_flags, dtype=bool)
    if t.shape[0] != e.shape[0] or t.shape[0] != core_flags.shape[0]:
        raise ValueError("assignments and core flags must cover the same points")
    keep = _resolved_pair_mask(t, e)
    excluded = int(np.sum(~keep))
    loss, n_pairs = _contingency_loss(t[keep], e[keep])

    core = keep & core_flags
    if np.sum(core) >= 2:
        core_loss, _ = _contingency_loss(t[core], e[core])
    else:
        core_loss = None
    return RiskReport(
        loss=loss,
        n_points=int(np.sum(keep)),
        n_pairs=n_pairs,
        core_loss=core_loss,
        core_fraction=float(np.mean(core_flags)),
        excluded=excluded,
    )


@dataclass
class ReplicationResult:
    mean_loss: float
    stderr: float | None
    losses: np.ndarray
    reports: list = field(default_factory=list, repr=False)
    flagged: list = field(default_factory=list)


def replicate_risk(replications, master_seed, pipeline, *, stage=STAGE_SAMPLE,
                   max_unresolved_fraction=0.01):
    """Run the sample->cluster->risk pipeline over independent substreams.

    ``pipeline(rng, tight)`` must return a RiskReport. A replication whose
    excluded fraction exceeds ``max_unresolved_fraction`` is rerun once with
    ``tight=True`` (same substream, hence same data, tighter flow
    tolerances); if still over, it is flagged.
    """
    replications = int(replications)
    if replications < 1:
        raise ValueError("replications must be >= 1")
    reports, flagged = [], []
    for rep in range(replications):
        report = pipeline(substream(master_seed, stage, rep), False)
        total = report.n_points + report.excluded
        if total and report.excluded / total > max_unresolved_fraction:
            report = pipeline(substream(master_seed, stage, rep), True)
            total = report.n_points + report.excluded
            if total and report.excluded / total > max_unresolved_fraction:
                flagged.append(rep)
        reports.append(report)
    losses = np.array([r.loss for r in reports])
    mean_loss = float(losses.mean())
    stderr = float(losses.std(ddof=1) / np.sqrt(replications)) if replications > 1 else None
    return ReplicationResult(mean_loss, stderr, losses, reports, flagged)
