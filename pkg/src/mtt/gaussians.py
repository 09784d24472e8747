"""Gaussian algebra shared by every filter in the package.

A tracked hypothesis is a weighted Gaussian: the weight is the probability
that the hypothesized target exists, the Gaussian is its state distribution.
This module provides the primitives the filters build on: log densities,
Mahalanobis quadratic forms, and moment-matched mixture reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularCovarianceError(np.linalg.LinAlgError):
    """Covariance stayed non-invertible even after jitter."""


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass
class GaussianState:
    """Mean vector plus symmetric PSD covariance.

    The covariance is symmetrized on construction so that downstream
    Cholesky factorizations never fail on round-off asymmetry alone.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {self.mean.shape}")
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError(
                f"cov shape {self.cov.shape} does not match mean dimension {n}"
            )
        self.cov = _symmetrize(self.cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def copy(self) -> "GaussianState":
        return GaussianState(self.mean.copy(), self.cov.copy())


@dataclass
class GaussianParticle:
    """Existence weight in [0, 1] paired with a Gaussian state hypothesis."""

    weight: float
    state: GaussianState

    def __post_init__(self) -> None:
        self.weight = float(self.weight)
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")

    def copy(self) -> "GaussianParticle":
        return GaussianParticle(self.weight, self.state.copy())


def chol_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with trace-scaled jitter.

    On the first failure adds 1e-12 * trace(cov)/n to the diagonal and
    retries; a second failure raises SingularCovarianceError.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        n = cov.shape[0]
        jitter = 1e-12 * np.trace(cov) / n
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError(
                "covariance is numerically singular even after jitter"
            ) from exc


def log_pdf(g: GaussianState, x: np.ndarray) -> float:
    """Log of the multivariate normal density N(x; g.mean, g.cov).

    log N(x) = -1/2 [ (x-mu)' Sigma^-1 (x-mu) + n log(2 pi) + log|Sigma| ]
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != g.mean.shape:
        raise ValueError(f"x shape {x.shape} does not match mean shape {g.mean.shape}")
    chol = chol_with_jitter(g.cov)
    u = np.linalg.solve(chol, x - g.mean)
    quad = float(u @ u)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    n = g.dim
    return -0.5 * (quad + n * np.log(2.0 * np.pi) + logdet)


def mahalanobis_sq(a: np.ndarray, b: np.ndarray, m: np.ndarray) -> float:
    """Quadratic form (a-b)' M (a-b) for symmetric PSD M."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if m.shape != (a.shape[0], a.shape[0]):
        raise ValueError(f"M shape {m.shape} does not match vectors of dim {a.shape[0]}")
    d = a - b
    return float(d @ m @ d)


def mixture_moments(
    means: list[np.ndarray], covs: list[np.ndarray], weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a Gaussian mixture (moment matching).

    mu = sum_i w_i mu_i
    Sigma = sum_i w_i (Sigma_i + (mu_i - mu)(mu_i - mu)')

    with weights normalized to sum to one.
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("mixture weights must have positive total")
    w = weights / total
    mean = np.zeros_like(np.asarray(means[0], dtype=float))
    for mu_i, w_i in zip(means, w):
        mean += w_i * np.asarray(mu_i, dtype=float)
    cov = np.zeros((mean.shape[0], mean.shape[0]))
    for mu_i, cov_i, w_i in zip(means, covs, w):
        diff = np.asarray(mu_i, dtype=float) - mean
        cov += w_i * (np.asarray(cov_i, dtype=float) + np.outer(diff, diff))
    return mean, _symmetrize(cov)


def moment_match_merge(
    particles: list[GaussianParticle], cov_mode: str = "moment"
) -> GaussianParticle:
    """Collapse weighted Gaussian particles into a single particle.

    The merged weight is the clamped sum of the input weights and the
    merged mean is the weight-normalized mean.  With cov_mode="moment"
    the covariance is the mixture covariance (spread of means included);
    "plain_sum" instead adds the input covariances unweighted, kept as a
    fidelity switch for experiments.
    """
    if not particles:
        raise ValueError("cannot merge an empty particle list")
    dims = {p.state.dim for p in particles}
    if len(dims) != 1:
        raise ValueError(f"particles have mixed dimensions: {sorted(dims)}")
    weights = np.array([p.weight for p in particles], dtype=float)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("total weight of merged particles must be positive")
    means = [p.state.mean for p in particles]
    covs = [p.state.cov for p in particles]
    mean, cov = mixture_moments(means, covs, weights)
    if cov_mode == "plain_sum":
        cov = _symmetrize(sum(covs))
    elif cov_mode != "moment":
        raise ValueError(f"unknown cov_mode {cov_mode!r}")
    return GaussianParticle(min(1.0, total), GaussianState(mean, cov))
