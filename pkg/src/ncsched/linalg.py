"""Matrix predicates and the PSD square root used for Gaussian sampling."""

import numpy as np

from .errors import ConfigError

# Symmetry / definiteness are enforced only up to these tolerances.
SYMMETRY_TOL = 1e-9
EIGENVALUE_TOL = 1e-9
CLIP_TOL = 1e-12


def symmetrize(mat):
    return 0.5 * (mat + mat.T)


def max_asymmetry(mat):
    return float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0


def check_spd(mat, name, *, definite=False):
    """Validate symmetry and (semi-)definiteness of a square matrix.

    `name` is the config field path reported on failure.  Positive
    semi-definite means the smallest eigenvalue is >= -EIGENVALUE_TOL;
    positive definite requires it to be >= +EIGENVALUE_TOL.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{name}: expected a square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ConfigError(f"{name}: contains non-finite entries")
    asym = max_asymmetry(mat)
    if asym > SYMMETRY_TOL:
        raise ConfigError(f"{name}: not symmetric (max asymmetry {asym:.3e})")
    eigmin = float(np.min(np.linalg.eigvalsh(symmetrize(mat)))) if mat.size else 0.0
    if definite:
        if eigmin <= 0.0:
            raise ConfigError(
                f"{name}: must be positive definite (min eigenvalue {eigmin:.3e})"
            )
    elif eigmin < -EIGENVALUE_TOL:
        raise ConfigError(
            f"{name}: must be positive semi-definite (min eigenvalue {eigmin:.3e})"
        )
    return mat


def psd_sqrt(mat, name="matrix"):
    """Symmetric square root of a PSD matrix via eigendecomposition.

    Eigenvalues in [-EIGENVALUE_TOL, 0) are treated as roundoff and clipped
    to zero, so singular covariances (including the zero matrix) are fine.
    Genuinely indefinite input is a specification error.
    """
    mat = np.asarray(mat, dtype=float)
    vals, vecs = np.linalg.eigh(symmetrize(mat))
    if vals.size and vals[0] < -EIGENVALUE_TOL:
        raise ConfigError(
            f"{name}: indefinite covariance (min eigenvalue {vals[0]:.3e})"
        )
    vals = np.where(vals < CLIP_TOL, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def quad_form(x, mat):
    """x' M x as a float."""
    return float(x @ mat @ x)
