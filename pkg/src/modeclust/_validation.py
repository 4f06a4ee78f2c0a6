"""Input validation helpers shared across the package."""

import numpy as np


def check_point(x, dim=None, name="x"):
    """Coerce to a finite 1-d float array, optionally enforcing its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-d coordinate vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite coordinates")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"{name} has dimension {x.shape[0]}, expected {dim}")
    return x


def check_points(X, dim=None, name="X", min_rows=1):
    """Coerce to a finite 2-d (n, d) float array.

    A single 1-d point is promoted to shape (1, d).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of points, got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} point(s), got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite coordinates")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    return X


def check_labels(labels, n=None, name="labels"):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {labels.shape}")
    if n is not None and labels.shape[0] != n:
        raise ValueError(f"{name} has length {labels.shape[0]}, expected {n}")
    return labels


def check_symmetric_spd(cov, tol=1e-12, name="covariance"):
    """Validate symmetry and positive definiteness; return the array and its Cholesky factor."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {cov.shape}")
    asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
    if asym >= tol:
        raise ValueError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigmin = np.linalg.eigvalsh(cov).min()
        raise ValueError(f"{name} is not positive definite (min eigenvalue {eigmin:.3e})")
    return cov, chol


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
