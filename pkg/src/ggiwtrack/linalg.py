"""Small dense symmetric-matrix primitives and density evaluations.

Everything here operates on plain numpy arrays.  Symmetric positive
(semi-)definite matrices are represented as ``(d, d)`` float arrays;
``as_spd`` is the checked constructor used at module boundaries.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ggiwtrack.errors import DomainError

# Relative asymmetry tolerated before as_spd() rejects the input.
SYM_RTOL = 1e-9

LOG_2PI = math.log(2.0 * math.pi)


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (A + A^T)/2, suppressing floating-point asymmetry."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def as_spd(a: np.ndarray, *, name: str = "matrix") -> np.ndarray:
    """Validate and symmetrize a positive semi-definite matrix.

    Raises DomainError if the input is materially asymmetric or has an
    eigenvalue below ``-SYM_RTOL * trace``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > SYM_RTOL * scale:
        raise DomainError(f"{name} is not symmetric")
    a = symmetrize(a)
    w = np.linalg.eigvalsh(a)
    if w.min() < -1e-9 * max(np.trace(a), 1.0):
        raise DomainError(f"{name} is not positive semi-definite (min eig {w.min():g})")
    return a


def spd_sqrt(a: np.ndarray) -> np.ndarray:
    """Principal symmetric square root of a PSD matrix.

    Uses an eigendecomposition so PSD-but-singular inputs are accepted;
    eigenvalues below the PSD tolerance raise DomainError.
    """
    a = np.asarray(a, dtype=float)
    w, q = np.linalg.eigh(symmetrize(a))
    if w.min() < -1e-9 * max(np.trace(a), 1.0):
        raise DomainError(f"spd_sqrt: input not PSD (min eig {w.min():g})")
    root = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
    return symmetrize(root)


def gaussian_logpdf(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Log density of N(y; mu, sigma) for strictly positive definite sigma."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    try:
        cf = cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError("gaussian_logpdf: covariance not positive definite") from exc
    d = y.shape[-1]
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    r = y - mu
    maha = float(r @ cho_solve(cf, r))
    return -0.5 * (d * LOG_2PI + logdet + maha)


def gaussian_logpdf_many(ys: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Vectorized ``gaussian_logpdf`` over the rows of ``ys`` ((m, d) array)."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    mu = np.asarray(mu, dtype=float)
    try:
        cf = cho_factor(np.asarray(sigma, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError("gaussian_logpdf_many: covariance not positive definite") from exc
    d = ys.shape[1]
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    r = ys - mu
    maha = np.einsum("ij,ij->i", r, cho_solve(cf, r.T).T)
    return -0.5 * (d * LOG_2PI + logdet + maha)


def mahalanobis_sq(ys: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distance of each row of ``ys`` from ``mu`` under ``sigma``."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    try:
        cf = cho_factor(np.asarray(sigma, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError("mahalanobis_sq: covariance not positive definite") from exc
    r = ys - np.asarray(mu, dtype=float)
    return np.einsum("ij,ij->i", r, cho_solve(cf, r.T).T)


def inverse_wishart_mean(v: float, scale: np.ndarray, d: int) -> np.ndarray:
    """Mean of an inverse-Wishart distribution: scale / (v - 2d - 2)."""
    denom = v - 2 * d - 2
    if denom <= 0:
        raise DomainError(f"inverse-Wishart mean undefined for dof {v} (d={d})")
    return np.asarray(scale, dtype=float) / denom


def gamma_mean(alpha: float, beta: float) -> float:
    """Mean of a gamma distribution in the shape/rate convention."""
    if alpha <= 0 or beta <= 0:
        raise DomainError(f"gamma parameters must be positive, got ({alpha}, {beta})")
    return alpha / beta
