"""Shared fixtures: standard test mixtures and the brute-force flow oracle."""

import numpy as np
import pytest

from modeclust import GaussianMixture, spherical_mixture


@pytest.fixture
def gm_1d_two():
    """Equal mixture of unit-variance components at -2 and +2 (d=1)."""
    return spherical_mixture([0.5, 0.5], [[-2.0], [2.0]], 1.0)


@pytest.fixture
def gm_2d_sym():
    """Equal mixture of unit-covariance components at (-2.5, 0), (2.5, 0)."""
    return spherical_mixture([0.5, 0.5], [[-2.5, 0.0], [2.5, 0.0]], 1.0)


@pytest.fixture
def gm_2d_tilted():
    """Anisotropic 2-component mixture with a curved basin boundary."""
    def rot(theta):
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]])

    covs = []
    for theta in (np.deg2rad(35.0), np.deg2rad(-35.0)):
        r = rot(theta)
        covs.append(r @ np.diag([1.8, 0.5]) @ r.T)
    return GaussianMixture([0.5, 0.5], [[-2.2, -0.8], [2.2, 0.8]], np.stack(covs))


def rk4_flow(model, x, dt, steps, field="score"):
    """Fixed-step RK4 ascent integration: the brute-force destination oracle."""
    f = model.score if field == "score" else model.gradient
    y = np.asarray(x, dtype=float).copy()
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def finite_diff_gradient(fn, x, step):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fn(x + e) - fn(x - e)) / (2 * step)
    return g


def finite_diff_hessian(fn, x, step):
    x = np.asarray(x, dtype=float)
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d); ei[i] = step
            ej = np.zeros(d); ej[j] = step
            H[i, j] = (fn(x + ei + ej) - fn(x + ei - ej)
                       - fn(x - ei + ej) + fn(x - ei - ej)) / (4 * step * step)
    return H
