"""GGIW target state, motion model, and the time update.

A target is described by six parameters: Gaussian kinematics (mean ``m``,
covariance ``P``), an inverse-Wishart extent (dof ``v``, scale ``V``), and a
gamma measurement rate (shape ``alpha``, rate ``beta``).  The planar case is
assumed throughout: 4-d kinematic state ``(px, py, vx, vy)`` and 2x2 extent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ggiwtrack import linalg
from ggiwtrack.errors import DomainError

EXTENT_DIM = 2
# Smallest inverse-Wishart dof for which the 2-d extent mean exists.
MIN_EXTENT_DOF = 2 * EXTENT_DIM + 2


@dataclass(frozen=True)
class GgiwState:
    """One target's posterior (or prior) at one time step.

    Treated as an immutable value; updates return new instances.
    """

    m: np.ndarray          # (4,) position and velocity
    P: np.ndarray          # (4, 4) kinematic covariance
    v: float               # extent inverse-Wishart dof, must exceed 6
    V: np.ndarray          # (2, 2) extent inverse-Wishart scale, m^2
    alpha: float           # measurement-rate gamma shape
    beta: float            # measurement-rate gamma rate

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float).reshape(4))
        object.__setattr__(self, "P", linalg.as_spd(self.P, name="P"))
        object.__setattr__(self, "V", linalg.as_spd(self.V, name="V"))
        if self.v <= MIN_EXTENT_DOF:
            raise DomainError(f"extent dof must exceed {MIN_EXTENT_DOF}, got {self.v}")
        if self.alpha <= 0 or self.beta <= 0:
            raise DomainError("gamma parameters must be positive")

    def extent_mean(self) -> np.ndarray:
        return linalg.inverse_wishart_mean(self.v, self.V, EXTENT_DIM)

    def rate_mean(self) -> float:
        return linalg.gamma_mean(self.alpha, self.beta)


@dataclass(frozen=True)
class MotionModel:
    """Dynamics, sensor model and time-update tunables shared by all targets."""

    Phi: np.ndarray        # (4, 4) state transition
    G: np.ndarray          # (4, 4) process-noise covariance
    H: np.ndarray          # (2, 4) measurement matrix
    R: np.ndarray          # (2, 2) sensor-noise covariance
    tau: float = 50.0      # extent-evolution dof
    E: np.ndarray | None = None   # (2, 2) extent-evolution matrix; None -> I/sqrt(tau)
    iota: float = 1.25     # rate forgetting factor, > 1
    s: float = 0.25        # scattering-center scaling in the distortion matrix

    def __post_init__(self):
        object.__setattr__(self, "Phi", np.asarray(self.Phi, dtype=float).reshape(4, 4))
        object.__setattr__(self, "G", linalg.as_spd(self.G, name="G"))
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float).reshape(2, 4))
        object.__setattr__(self, "R", linalg.as_spd(self.R, name="R"))
        e = self.E
        if e is None:
            e = np.eye(EXTENT_DIM) / np.sqrt(self.tau)
        e = np.asarray(e, dtype=float).reshape(EXTENT_DIM, EXTENT_DIM)
        if abs(np.linalg.det(e)) <= 1e-12:
            raise DomainError("extent-evolution matrix must be invertible")
        object.__setattr__(self, "E", e)
        if self.iota <= 1.0:
            raise DomainError(f"forgetting factor must exceed 1, got {self.iota}")
        if self.tau <= 0 or self.s <= 0:
            raise DomainError("tau and s must be positive")

    @classmethod
    def constant_velocity(
        cls,
        dt: float = 1.0,
        process_noise_diag=(1.0, 1.0, 0.1, 0.1),
        measurement_noise_diag=(0.01, 0.01),
        **kwargs,
    ) -> "MotionModel":
        """Planar constant-velocity model with a position-only sensor."""
        phi = np.kron(np.array([[1.0, dt], [0.0, 1.0]]), np.eye(2))
        h = np.hstack([np.eye(2), np.zeros((2, 2))])
        return cls(
            Phi=phi,
            G=np.diag(process_noise_diag),
            H=h,
            R=np.diag(measurement_noise_diag),
            **kwargs,
        )


def predict_kinematic(state: GgiwState, model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    """Kalman time update of the kinematic mean and covariance."""
    m_pred = model.Phi @ state.m
    p_pred = linalg.symmetrize(model.Phi @ state.P @ model.Phi.T + model.G)
    return m_pred, p_pred


def predict_extent(state: GgiwState, model: MotionModel) -> tuple[float, np.ndarray]:
    """Wishart-evolution time update of the extent dof and scale."""
    gamma = state.v - MIN_EXTENT_DOF
    if gamma <= 0:
        raise DomainError(f"extent dof {state.v} leaves no mass for prediction")
    tau = model.tau
    v_pred = (
        2.0 * tau * (gamma + 1.0) * (gamma - 1.0) * (gamma - 2.0)
        / (gamma**2 * (gamma + tau))
        + 2 * EXTENT_DIM + 4
    )
    v_scale = (tau / gamma) * (v_pred - MIN_EXTENT_DOF)
    vmat_pred = linalg.symmetrize(v_scale * model.E @ state.V @ model.E.T)
    return v_pred, vmat_pred


def predict_rate(state: GgiwState, model: MotionModel) -> tuple[float, float]:
    """Mean-preserving exponential forgetting of the gamma rate parameters."""
    return state.alpha / model.iota, state.beta / model.iota


def predict(state: GgiwState, model: MotionModel) -> GgiwState:
    """Full time update of one target."""
    m_pred, p_pred = predict_kinematic(state, model)
    v_pred, vmat_pred = predict_extent(state, model)
    a_pred, b_pred = predict_rate(state, model)
    return GgiwState(m=m_pred, P=p_pred, v=v_pred, V=vmat_pred, alpha=a_pred, beta=b_pred)


def distortion_matrix(extent_mean: np.ndarray, model: MotionModel) -> np.ndarray:
    """Map from the latent extent to the observed measurement spread.

    Returns D with D @ X @ D.T = s*X + R for X the predicted extent mean,
    i.e. the measurement spread absorbs the scattering scale and the sensor
    noise.  Requires a strictly positive definite extent mean.
    """
    x = np.asarray(extent_mean, dtype=float)
    w = np.linalg.eigvalsh(linalg.symmetrize(x))
    if w.min() <= 1e-12 * max(np.trace(x), 1.0):
        raise DomainError("distortion matrix needs a positive definite extent")
    spread_root = linalg.spd_sqrt(model.s * x + model.R)
    x_root = linalg.spd_sqrt(x)
    return spread_root @ np.linalg.inv(x_root)


def extent_from_shape(axis_lengths: tuple[float, float], orientation: float) -> np.ndarray:
    """Extent matrix of an ellipse given full axis lengths (m) and orientation (rad).

    Eigenvalues are the squared semi-axes; the principal eigenvector points
    along ``orientation``.
    """
    l1, l2 = axis_lengths
    if l1 <= 0 or l2 <= 0:
        raise DomainError("axis lengths must be positive")
    c, s = np.cos(orientation), np.sin(orientation)
    rot = np.array([[c, -s], [s, c]])
    return linalg.symmetrize(rot @ np.diag([(l1 / 2.0) ** 2, (l2 / 2.0) ** 2]) @ rot.T)
