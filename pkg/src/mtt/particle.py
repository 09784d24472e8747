"""Classical SIR particle filter for a single target.

Point-mass particles, transition-prior proposal, likelihood weighting,
and resampling triggered when the effective sample size degenerates.
Multi-target handling lives in the Gaussian-particle filter; this module
is the single-target baseline with known association.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kalman import LinearGaussianModel


@dataclass
class PointParticleSet:
    """Point-mass particles with normalized weights.

    states has shape (N, n); weights has shape (N,) and sums to one.
    zero_likelihood flags a step on which every likelihood vanished and
    the weights were reset to uniform.
    """

    states: np.ndarray
    weights: np.ndarray
    zero_likelihood: bool = False

    def __post_init__(self) -> None:
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.states.shape[0] != self.weights.shape[0]:
            raise ValueError(
                f"{self.states.shape[0]} states but {self.weights.shape[0]} weights"
            )
        if self.states.shape[0] < 1:
            raise ValueError("particle set must be non-empty")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.states


def effective_sample_size(weights: np.ndarray) -> float:
    """ESS = 1 / sum(w^2) for normalized weights; lies in [1, N]."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"weights are not normalized (sum = {total!r})")
    return float(1.0 / np.sum(weights**2))


def resample_multinomial(pset: PointParticleSet, rng: np.random.Generator) -> PointParticleSet:
    """Draw N particles with replacement proportional to weight; reset to 1/N."""
    n = pset.n_particles
    idx = rng.choice(n, size=n, replace=True, p=pset.weights)
    return PointParticleSet(pset.states[idx], np.full(n, 1.0 / n))


def resample_systematic(pset: PointParticleSet, rng: np.random.Generator) -> PointParticleSet:
    """Low-variance systematic resampling (one uniform draw per sweep)."""
    n = pset.n_particles
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(pset.weights), positions)
    idx = np.clip(idx, 0, n - 1)
    return PointParticleSet(pset.states[idx], np.full(n, 1.0 / n))


_RESAMPLERS = {
    "multinomial": resample_multinomial,
    "systematic": resample_systematic,
}


def pf_step(
    pset: PointParticleSet,
    model: LinearGaussianModel,
    likelihood: Callable[[np.ndarray, np.ndarray], float],
    z: np.ndarray,
    rng: np.random.Generator,
    ess_ratio: float = 0.5,
    resample: str = "multinomial",
) -> PointParticleSet:
    """One SIR iteration: propagate, reweight, normalize, maybe resample.

    Particles are proposed from the transition prior x' ~ N(F x, Q) and
    reweighted by likelihood(x', z).  Resampling fires iff the effective
    sample size drops below ess_ratio * N (the customary N/2 by default).
    If every likelihood is zero the weights fall back to uniform and the
    returned set carries zero_likelihood=True.
    """
    if resample not in _RESAMPLERS:
        raise ValueError(f"unknown resampling scheme {resample!r}")
    n = pset.n_particles
    propagated = pset.states @ model.F.T
    if np.any(model.Q):
        noise = rng.multivariate_normal(np.zeros(model.state_dim), model.Q, size=n)
        propagated = propagated + noise

    z = np.atleast_1d(np.asarray(z, dtype=float))
    like = np.array([likelihood(propagated[p], z) for p in range(n)], dtype=float)
    if np.any(like < 0):
        raise ValueError("likelihood returned a negative value")
    weights = pset.weights * like
    total = weights.sum()
    degenerate = total <= 0.0
    if degenerate:
        weights = np.full(n, 1.0 / n)
    else:
        weights = weights / total

    out = PointParticleSet(propagated, weights, zero_likelihood=degenerate)
    if effective_sample_size(out.weights) < ess_ratio * n:
        resampled = _RESAMPLERS[resample](out, rng)
        resampled.zero_likelihood = degenerate
        return resampled
    return out
