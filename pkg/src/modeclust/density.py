"""Density models with analytic gradients and Hessians.

Two concrete models share one evaluation interface: full-covariance Gaussian
mixtures (exact ground truth, sampler, exact kernel-smoothing oracle) and the
Gaussian-kernel density estimate built from a sample. Both accept a single
point ``(d,)`` or a batch ``(m, d)`` and return correspondingly shaped output.

All models are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import check_points, check_positive, check_symmetric_spd

_LOG_2PI = float(np.log(2.0 * np.pi))

# densities below this are treated as zero in ratios (mean-shift weights,
# score fields) so 0/0 never propagates
DENSITY_FLOOR = 1e-300


class DensityModel:
    """Uniform interface: density, gradient, and Hessian at a point.

    Subclasses implement :meth:`evaluate`; the convenience accessors and the
    floored score field are shared. ``x`` may be one point ``(d,)`` or a
    batch ``(m, d)``.
    """

    dim: int

    def evaluate(self, x):
        """Return ``(density, gradient, hessian)`` at ``x``."""
        raise NotImplementedError

    def density_and_gradient(self, x):
        """Like :meth:`evaluate` but skips the Hessian (cheaper in hot loops)."""
        p, g, _ = self.evaluate(x)
        return p, g

    def density(self, x):
        return self.density_and_gradient(x)[0]

    def gradient(self, x):
        return self.density_and_gradient(x)[1]

    def hessian(self, x):
        return self.evaluate(x)[2]

    def score(self, x):
        """Gradient of log density, ``grad p / p``, floored against underflow.

        Defines the same ascent flow lines as the raw gradient field but with
        a density-independent magnitude, which keeps destination-finding fast
        in low-density regions.
        """
        p, g = self.density_and_gradient(x)
        p = np.maximum(np.asarray(p, dtype=float), DENSITY_FLOOR)
        if g.ndim == 1:
            return g / p
        return g / p[:, None]

    def _coerce(self, x):
        """Normalize input to (m, d); remember whether a single point came in."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = check_points(x, dim=self.dim)
        return X, single


class GaussianMixture(DensityModel):
    """Finite Gaussian mixture with full covariances.

    Serves as the exact ground-truth density: analytic derivatives, an exact
    sampler, and a closed-form oracle for Gaussian-kernel smoothing.

    Parameters
    ----------
    weights : array-like, shape (k,)
        Strictly positive, summing to 1 within 1e-12.
    means : array-like, shape (k, d)
    covariances : array-like, shape (k, d, d)
        Symmetric positive definite.
    """

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (off by {weights.sum() - 1.0:.3e})")
        means = check_points(means, name="means")
        k, d = means.shape
        if weights.shape[0] != k:
            raise ValueError("weights and means disagree on the number of components")

        covariances = np.asarray(covariances, dtype=float)
        if covariances.shape != (k, d, d):
            raise ValueError(f"covariances must have shape {(k, d, d)}, got {covariances.shape}")
        chols = []
        for j in range(k):
            _, chol = check_symmetric_spd(covariances[j], name=f"covariance {j}")
            chols.append(chol)

        self.weights = weights
        self.means = means
        self.covariances = covariances
        self.dim = d
        self.n_components = k
        # precomputed per component: Cholesky factor, inverse, log-normalizer
        self._chol = np.stack(chols)
        self._inv = np.stack([np.linalg.inv(covariances[j]) for j in range(k)])
        logdets = 2.0 * np.sum(np.log(np.diagonal(self._chol, axis1=1, axis2=2)), axis=1)
        self._log_norm = -0.5 * (logdets + d * _LOG_2PI)
        self._log_w = np.log(weights)

    def _log_components(self, X):
        """Per-point, per-component log(weight * N_j(x)) and solved deviations.

        Returns ``(logc, sol)`` with shapes (m, k) and (m, k, d) where
        ``sol = Sigma_j^{-1} (x - mu_j)``.
        """
        diff = X[:, None, :] - self.means[None, :, :]
        sol = np.einsum("kij,mkj->mki", self._inv, diff)
        quad = np.einsum("mki,mki->mk", diff, sol)
        logc = self._log_w + self._log_norm - 0.5 * quad
        return logc, sol

    def evaluate(self, x):
        X, single = self._coerce(x)
        logc, sol = self._log_components(X)
        logp = logsumexp(logc, axis=1)
        p = np.exp(logp)
        # responsibilities stay finite even when p underflows
        w = np.exp(logc - logp[:, None])
        score = -np.einsum("mk,mki->mi", w, sol)
        g = p[:, None] * score
        outer = np.einsum("mki,mkj->mkij", sol, sol)
        hess_norm = np.einsum("mk,mkij->mij", w, outer - self._inv[None, :, :, :])
        H = p[:, None, None] * hess_norm
        if single:
            return float(p[0]), g[0], H[0]
        return p, g, H

    def density_and_gradient(self, x):
        X, single = self._coerce(x)
        logc, sol = self._log_components(X)
        logp = logsumexp(logc, axis=1)
        p = np.exp(logp)
        w = np.exp(logc - logp[:, None])
        g = p[:, None] * (-np.einsum("mk,mki->mi", w, sol))
        if single:
            return float(p[0]), g[0]
        return p, g

    def score(self, x):
        # responsibility-weighted form; exact even where the density underflows
        X, single = self._coerce(x)
        logc, sol = self._log_components(X)
        logp = logsumexp(logc, axis=1)
        w = np.exp(logc - logp[:, None])
        s = -np.einsum("mk,mki->mi", w, sol)
        return s[0] if single else s

    def log_density(self, x):
        X, single = self._coerce(x)
        logc, _ = self._log_components(X)
        logp = logsumexp(logc, axis=1)
        return float(logp[0]) if single else logp

    def sample(self, n, rng):
        """Draw ``n`` i.i.d. points: component by weight, then its Gaussian."""
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[idx] + np.einsum("nij,nj->ni", self._chol[idx], z)

    def smoothed(self, h):
        """Exact Gaussian-kernel smoothing: same mixture with covariances + h^2 I.

        Equals the pointwise expectation of a bandwidth-``h`` Gaussian KDE
        built from samples of this mixture.
        """
        h = float(h)
        if h < 0:
            raise ValueError("bandwidth must be >= 0")
        if h == 0.0:
            return self
        bumped = self.covariances + (h * h) * np.eye(self.dim)[None, :, :]
        return GaussianMixture(self.weights, self.means, bumped)

    def __repr__(self):
        return f"GaussianMixture(k={self.n_components}, d={self.dim})"


def spherical_mixture(weights, means, sigma):
    """Mixture of spherical components N(mu_j, sigma^2 I)."""
    means = check_points(means, name="means")
    k, d = means.shape
    sigma = check_positive(sigma, "sigma")
    covs = np.repeat((sigma * sigma * np.eye(d))[None, :, :], k, axis=0)
    return GaussianMixture(weights, means, covs)


class KernelDensityEstimate(DensityModel):
    """Gaussian-kernel density estimate with analytic derivatives.

    density(x) = (1/n) sum_i (2 pi)^{-d/2} h^{-d} exp(-||x - X_i||^2 / (2 h^2))

    The full Gaussian normalizer is included so the estimate is itself a
    probability density and its values are comparable across models.
    """

    def __init__(self, samples, bandwidth):
        samples = check_points(samples, name="samples")
        self.samples = samples
        self.bandwidth = check_positive(bandwidth, "bandwidth")
        self.n_samples, self.dim = samples.shape
        self._log_norm = -0.5 * self.dim * _LOG_2PI - self.dim * np.log(self.bandwidth)
        self._sample_sq = np.einsum("nd,nd->n", samples, samples)
        # cap per-chunk pairwise work at ~4e6 kernel entries
        self._chunk = max(1, int(4e6) // max(self.n_samples, 1))

    def _sqdist(self, X):
        """Pairwise squared distances to the samples via the quadratic expansion."""
        sq = (np.einsum("md,md->m", X, X)[:, None] + self._sample_sq[None, :]
              - 2.0 * X @ self.samples.T)
        return np.maximum(sq, 0.0)

    def _log_kernels(self, X):
        """(m, n) log of weight * kernel, including 1/n; and (m, n, d) deviations."""
        diff = self.samples[None, :, :] - X[:, None, :]
        sq = np.einsum("mnd,mnd->mn", diff, diff)
        logk = self._log_norm - np.log(self.n_samples) - 0.5 * sq / (self.bandwidth ** 2)
        return logk, diff

    def _evaluate_chunk(self, X, want_hessian):
        logk, diff = self._log_kernels(X)
        logp = logsumexp(logk, axis=1)
        p = np.exp(logp)
        w = np.exp(logk - logp[:, None])
        h2 = self.bandwidth ** 2
        mean_dev = np.einsum("mn,mnd->md", w, diff)
        g = p[:, None] * mean_dev / h2
        if not want_hessian:
            return p, g, None
        outer = np.einsum("mn,mni,mnj->mij", w, diff, diff)
        H = p[:, None, None] * (outer / h2 ** 2 - np.eye(self.dim)[None, :, :] / h2)
        return p, g, H

    def _batched(self, X, want_hessian):
        m = X.shape[0]
        if m <= self._chunk:
            return self._evaluate_chunk(X, want_hessian)
        parts = [self._evaluate_chunk(X[i : i + self._chunk], want_hessian)
                 for i in range(0, m, self._chunk)]
        p = np.concatenate([c[0] for c in parts])
        g = np.concatenate([c[1] for c in parts])
        H = np.concatenate([c[2] for c in parts]) if want_hessian else None
        return p, g, H

    def evaluate(self, x):
        X, single = self._coerce(x)
        p, g, H = self._batched(X, want_hessian=True)
        if single:
            return float(p[0]), g[0], H[0]
        return p, g, H

    def density_and_gradient(self, x):
        X, single = self._coerce(x)
        p, g, _ = self._batched(X, want_hessian=False)
        if single:
            return float(p[0]), g[0]
        return p, g

    def score(self, x):
        X, single = self._coerce(x)
        moved, under = self.kernel_weighted_mean(X)
        out = (moved - X) / self.bandwidth ** 2
        out[under] = 0.0
        return out[0] if single else out

    def kernel_weighted_mean(self, x):
        """Kernel-weighted mean of the samples at each query point.

        This is one mean-shift update; equals ``x + h^2 * score(x)``. Rows
        whose kernel weights all underflow (density below the floor) are
        returned unchanged, flagged in the second output.
        """
        X, single = self._coerce(x)
        out = np.empty_like(X)
        underflow = np.zeros(X.shape[0], dtype=bool)
        two_h2 = 2.0 * self.bandwidth ** 2
        log_floor = np.log(DENSITY_FLOOR)
        for i in range(0, X.shape[0], self._chunk):
            block = X[i : i + self._chunk]
            sq = self._sqdist(block)
            rowmin = sq.min(axis=1)
            # weights are scale-free: normalize by the largest kernel value
            w = np.exp((rowmin[:, None] - sq) / two_h2)
            s = w.sum(axis=1)
            logp = (np.log(s) - rowmin / two_h2 + self._log_norm
                    - np.log(self.n_samples))
            dead = logp < log_floor
            moved = (w @ self.samples) / s[:, None]
            moved[dead] = block[dead]
            out[i : i + self._chunk] = moved
            underflow[i : i + self._chunk] = dead
        if single:
            return out[0], bool(underflow[0])
        return out, underflow

    def __repr__(self):
        return f"KernelDensityEstimate(n={self.n_samples}, d={self.dim}, h={self.bandwidth})"


@dataclass(frozen=True)
class Discrepancy:
    """Sup-norm gaps between two models over a probe set.

    ``value_gap``, ``gradient_gap``, ``hessian_gap`` are the maxima of
    |p - q|, ||grad p - grad q||_2, and the spectral norm of the Hessian
    difference; ``max_gap`` is their maximum.
    """

    value_gap: float
    gradient_gap: float
    hessian_gap: float

    @property
    def max_gap(self):
        return max(self.value_gap, self.gradient_gap, self.hessian_gap)


def sup_discrepancy(p, q, probe):
    """Estimate sup-norm discrepancies between two models over a probe set.

    The true suprema over R^d are unattainable; maxima over a well-chosen
    probe set (see :func:`build_probe_set`) stand in for them.
    """
    if p.dim != q.dim:
        raise ValueError(f"models disagree on dimension: {p.dim} vs {q.dim}")
    probe = check_points(probe, dim=p.dim, name="probe")
    pv, pg, ph = p.evaluate(probe)
    qv, qg, qh = q.evaluate(probe)
    value_gap = float(np.max(np.abs(pv - qv)))
    gradient_gap = float(np.max(np.linalg.norm(pg - qg, axis=1)))
    eig = np.linalg.eigvalsh(ph - qh)
    hessian_gap = float(np.max(np.abs(eig)))
    return Discrepancy(value_gap, gradient_gap, hessian_gap)


def build_probe_set(points=None, means=None, pad=1.0, grid_per_axis=100, dim=None):
    """Assemble the probe set used to approximate sup-norms.

    Data points and model means are always included; in dimension <= 2 a
    regular grid over their bounding box (padded by ``pad``) is added.
    """
    parts = []
    for arr in (points, means):
        if arr is not None and np.size(arr) > 0:
            parts.append(check_points(arr, dim=dim, name="probe anchors"))
    if not parts:
        raise ValueError("probe set needs at least one anchor array")
    anchors = np.vstack(parts)
    d = anchors.shape[1]
    if d > 2:
        return anchors
    lo = anchors.min(axis=0) - pad
    hi = anchors.max(axis=0) + pad
    axes = [np.linspace(lo[i], hi[i], grid_per_axis) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    return np.vstack([anchors, grid])
