"""Linear-Gaussian Kalman filter: predict and update steps.

Serves three roles: a single-target baseline, the exact oracle that the
particle filters are checked against, and the inner engine of the
Gaussian-particle conditional update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .gaussians import GaussianState, chol_with_jitter, _symmetrize


def _check_psd_shape(m: np.ndarray, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    if not np.allclose(m, m.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    return m


@dataclass
class LinearGaussianModel:
    """x' = F x + B u + v,  z = H x + w,  v ~ N(0, Q),  w ~ N(0, R).

    B may be omitted for uncontrolled dynamics.
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    B: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.Q = _check_psd_shape(self.Q, "Q")
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.R = _check_psd_shape(self.R, "R")
        n = self.F.shape[0]
        if self.F.shape != (n, n):
            raise ValueError(f"F must be square, got {self.F.shape}")
        if self.Q.shape != (n, n):
            raise ValueError(f"Q shape {self.Q.shape} does not match state dim {n}")
        if self.H.shape[1] != n:
            raise ValueError(f"H shape {self.H.shape} does not match state dim {n}")
        if self.R.shape != (self.H.shape[0], self.H.shape[0]):
            raise ValueError(
                f"R shape {self.R.shape} does not match measurement dim {self.H.shape[0]}"
            )
        if self.B is not None:
            self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
            if self.B.shape[0] != n:
                raise ValueError(f"B shape {self.B.shape} does not match state dim {n}")

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def meas_dim(self) -> int:
        return self.H.shape[0]


class KalmanUpdate(NamedTuple):
    posterior: GaussianState
    residual: np.ndarray
    innovation_cov: np.ndarray
    gain: np.ndarray


def kf_predict(
    prior: GaussianState, model: LinearGaussianModel, u: np.ndarray | None = None
) -> GaussianState:
    """Time update: mean F x + B u, covariance F Sigma F' + Q."""
    if prior.dim != model.state_dim:
        raise ValueError(
            f"state dim {prior.dim} does not match model dim {model.state_dim}"
        )
    mean = model.F @ prior.mean
    if u is not None:
        if model.B is None:
            raise ValueError("control input given but model has no B matrix")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        mean = mean + model.B @ u
    cov = model.F @ prior.cov @ model.F.T + model.Q
    return GaussianState(mean, cov)


def kf_update(
    pred: GaussianState, model: LinearGaussianModel, z: np.ndarray
) -> KalmanUpdate:
    """Measurement update with the optimal gain.

    y = z - H x,  S = H Sigma H' + R,  K = Sigma H' S^-1,
    x+ = x + K y.  The covariance is propagated in Joseph form,
    (I - KH) Sigma (I - KH)' + K R K', which is algebraically equal to
    (I - KH) Sigma at the optimal gain but keeps the result PSD.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[0] != model.meas_dim:
        raise ValueError(f"z dim {z.shape[0]} does not match model dim {model.meas_dim}")
    if pred.dim != model.state_dim:
        raise ValueError(
            f"state dim {pred.dim} does not match model dim {model.state_dim}"
        )
    h = model.H
    residual = z - h @ pred.mean
    innovation_cov = _symmetrize(h @ pred.cov @ h.T + model.R)
    chol = chol_with_jitter(innovation_cov)
    # K = Sigma H' S^-1 solved as S K' = H Sigma' to avoid forming S^-1
    kt = np.linalg.solve(chol.T, np.linalg.solve(chol, h @ pred.cov))
    gain = kt.T
    mean = pred.mean + gain @ residual
    i_kh = np.eye(pred.dim) - gain @ h
    cov = i_kh @ pred.cov @ i_kh.T + gain @ model.R @ gain.T
    return KalmanUpdate(GaussianState(mean, cov), residual, innovation_cov, gain)
