"""Gaussian particle filter for multi-target tracking.

The belief over an unknown number of targets is a set of weighted Gaussian
particles: each particle's weight is the probability that its target
exists, each particle's Gaussian is that target's state distribution, and
the expected target count is the sum of the weights.  State dimension never
grows with the number of targets.

A measurement made over the sensor's field of view is explained by
enumerating existence combinations: boolean vectors saying which in-view
particles are assumed present.  Every sufficiently probable combination
gets a conditional Kalman update for each of its active particles (with
the other active particles folded into the effective measurement noise),
a likelihood weight against the predicted measurement, and finally each
particle's weight and state are recovered by marginalizing over the
combinations that contain it.  Nearby particles are merged, low-weight
particles pruned, and detections can seed new ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussians import (
    GaussianParticle,
    GaussianState,
    log_pdf,
    mahalanobis_sq,
    mixture_moments,
    moment_match_merge,
)
from .kalman import KalmanUpdate, LinearGaussianModel, kf_update
from .motion import POSITION_IDX
from .regions import FovRegion
from .sensors import CellReturn, GridSensorModel, MeanSensorModel, detection_prob


class CombinatorialBlowupError(ValueError):
    """Too many in-view particles to enumerate existence combinations."""


@dataclass
class GpfParticleSet:
    """The multi-target belief at one time step."""

    particles: list[GaussianParticle]
    step: int = 0
    degenerate_step: bool = False

    def copy(self) -> "GpfParticleSet":
        return GpfParticleSet(
            [p.copy() for p in self.particles], self.step, self.degenerate_step
        )


@dataclass
class ExistenceCombination:
    """One hypothesis about which in-view particles are present.

    bits[i] = 1 means particle i of the in-view list is assumed to exist.
    prior is the Bernoulli product of the particle weights, posterior_weight
    the normalized measurement-weighted probability of the combination, and
    updated_states maps each active particle index to its conditionally
    updated Gaussian.
    """

    bits: tuple[int, ...]
    prior: float
    posterior_weight: float = 0.0
    updated_states: dict[int, GaussianState] = field(default_factory=dict)

    @property
    def n_active(self) -> int:
        return int(sum(self.bits))


@dataclass
class GpfConfig:
    """Everything one filter step needs besides the belief and measurement."""

    f_matrix: np.ndarray
    q_matrix: np.ndarray
    sensor: MeanSensorModel | GridSensorModel
    fov: FovRegion = field(default_factory=FovRegion.full)
    epsilon: float = 0.01
    d_thresh: float = 1.0
    w_prune: float = 0.01
    n_max: int = 100
    w_birth: float = 0.1
    clutter_density: float = 1.0
    merge_cov: str = "moment"
    s_max: int = 20
    position_idx: tuple[int, int] = POSITION_IDX

    def __post_init__(self) -> None:
        self.f_matrix = np.atleast_2d(np.asarray(self.f_matrix, dtype=float))
        self.q_matrix = np.atleast_2d(np.asarray(self.q_matrix, dtype=float))
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.d_thresh <= 0.0:
            raise ValueError(f"d_thresh must be positive, got {self.d_thresh}")
        if not 0.0 <= self.w_prune < 1.0:
            raise ValueError(f"w_prune must lie in [0, 1), got {self.w_prune}")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0.0 < self.w_birth <= 1.0:
            raise ValueError(f"w_birth must lie in (0, 1], got {self.w_birth}")
        if self.clutter_density <= 0.0:
            raise ValueError("clutter_density must be positive")


def gpf_predict(pset: GpfParticleSet, f: np.ndarray, q: np.ndarray) -> GpfParticleSet:
    """Propagate every particle's Gaussian; existence weights are untouched."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    out = []
    for p in pset.particles:
        if p.state.dim != f.shape[0]:
            raise ValueError(
                f"particle dim {p.state.dim} does not match F dim {f.shape[0]}"
            )
        mean = f @ p.state.mean
        cov = f @ p.state.cov @ f.T + q
        out.append(GaussianParticle(p.weight, GaussianState(mean, cov)))
    return GpfParticleSet(out, pset.step, pset.degenerate_step)


def select_fov_particles(
    pset: GpfParticleSet,
    fov: FovRegion,
    position_idx: tuple[int, int] = POSITION_IDX,
) -> tuple[list[int], list[int]]:
    """Partition particle indices by whether the mean position is in view.

    The region is closed, so a mean exactly on the boundary counts as in
    view.
    """
    xi, yi = position_idx
    in_fov, out_of_fov = [], []
    for i, p in enumerate(pset.particles):
        if fov.contains(p.state.mean[xi], p.state.mean[yi]):
            in_fov.append(i)
        else:
            out_of_fov.append(i)
    return in_fov, out_of_fov


def enumerate_combinations(
    fov_particles: list[GaussianParticle], epsilon: float, s_max: int = 20
) -> list[ExistenceCombination]:
    """All boolean existence vectors whose Bernoulli prior exceeds epsilon.

    The prior of a vector e is prod_i w_i^e_i (1 - w_i)^(1 - e_i).  The
    search is depth first with pruning: once a partial product is <= epsilon
    it can never recover, because every remaining factor is at most one.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    s = len(fov_particles)
    if s > s_max:
        raise CombinatorialBlowupError(
            f"{s} particles in view would mean up to 2^{s} combinations; "
            "raise epsilon or shrink the field of view"
        )
    weights = [p.weight for p in fov_particles]
    found: list[ExistenceCombination] = []

    def descend(k: int, bits: list[int], partial: float) -> None:
        if partial <= epsilon:
            return
        if k == s:
            found.append(ExistenceCombination(tuple(bits), partial))
            return
        w = weights[k]
        bits.append(1)
        descend(k + 1, bits, partial * w)
        bits[-1] = 0
        descend(k + 1, bits, partial * (1.0 - w))
        bits.pop()

    descend(0, [], 1.0)
    return found


def conditional_kf_update(
    j: int,
    bits: tuple[int, ...],
    fov_particles: list[GaussianParticle],
    z: np.ndarray,
    r: np.ndarray,
    projection: np.ndarray | None = None,
) -> KalmanUpdate:
    """Kalman update of particle j assuming the combination `bits` holds.

    The sensor reports the mean of the active targets, so from particle
    j's point of view the measurement matrix shrinks to projection / n
    (n = number of active particles), the other active particles'
    predicted means are subtracted out of z, and their covariances join
    the measurement noise:

        z'    = z - P (sum_{i != j} e_i mu_i) / n
        H     = P / n
        R_eff = (1/n^2) sum_{i != j} e_i P Sigma_i P' + R

    With a single active particle this is exactly the plain Kalman update.
    """
    if bits[j] != 1:
        raise ValueError(f"particle {j} is not active in combination {bits}")
    n_active = int(sum(bits))
    if n_active == 0:
        raise ValueError("combination has no active particle")
    state = fov_particles[j].state
    if projection is None:
        projection = np.eye(state.dim)
    projection = np.atleast_2d(np.asarray(projection, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if z.shape[0] != projection.shape[0]:
        raise ValueError(
            f"z dim {z.shape[0]} does not match projection rows {projection.shape[0]}"
        )

    others_mean = np.zeros(projection.shape[0])
    others_cov = np.zeros((projection.shape[0], projection.shape[0]))
    for i, p in enumerate(fov_particles):
        if bits[i] and i != j:
            others_mean += projection @ p.state.mean
            others_cov += projection @ p.state.cov @ projection.T

    z_eff = z - others_mean / n_active
    h = projection / n_active
    r_eff = others_cov / n_active**2 + r
    model = LinearGaussianModel(
        F=np.eye(state.dim), Q=np.zeros((state.dim, state.dim)), H=h, R=r_eff
    )
    return kf_update(state, model, z_eff)


def combination_log_weight(
    combo: ExistenceCombination,
    fov_particles: list[GaussianParticle],
    z: np.ndarray,
    r: np.ndarray,
    clutter_density: float,
    projection: np.ndarray | None = None,
) -> float:
    """Log of prior times evidence, using predicted (pre-update) moments.

    An active combination predicts z ~ N(mu_c, Sigma_c) with
    mu_c = P (sum_active mu_i) / n and
    Sigma_c = (1/n^2) P (sum_active Sigma_i) P' + R.
    The all-zero combination explains the measurement as clutter at the
    configured density.
    """
    active = [i for i, e in enumerate(combo.bits) if e]
    if not active:
        return math.log(combo.prior) + math.log(clutter_density)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    dim = fov_particles[active[0]].state.dim
    if projection is None:
        projection = np.eye(dim)
    projection = np.atleast_2d(np.asarray(projection, dtype=float))
    n = len(active)
    mean_sum = sum(fov_particles[i].state.mean for i in active)
    cov_sum = sum(fov_particles[i].state.cov for i in active)
    mu_c = projection @ mean_sum / n
    sigma_c = projection @ cov_sum @ projection.T / n**2 + r
    return math.log(combo.prior) + log_pdf(GaussianState(mu_c, sigma_c), z)


def combination_weight(
    combo: ExistenceCombination,
    fov_particles: list[GaussianParticle],
    z: np.ndarray,
    r: np.ndarray,
    clutter_density: float,
    projection: np.ndarray | None = None,
) -> float:
    """Unnormalized combination weight: prior times measurement evidence."""
    return math.exp(
        combination_log_weight(combo, fov_particles, z, r, clutter_density, projection)
    )


def normalize_combination_weights(
    combos: list[ExistenceCombination], log_weights: list[float]
) -> None:
    """Fill posterior_weight from log weights, normalized to sum to one."""
    if not combos:
        return
    shift = max(log_weights)
    raw = np.exp(np.asarray(log_weights) - shift)
    total = raw.sum()
    for combo, w in zip(combos, raw / total):
        combo.posterior_weight = float(w)


def marginalize_existence(
    combos: list[ExistenceCombination], fov_particles: list[GaussianParticle]
) -> list[GaussianParticle]:
    """Recover per-particle weights and states from combination posteriors.

    A particle's existence probability is the total normalized weight of
    the combinations that contain it; its state is the moment-matched
    mixture of its conditional updates under those combinations.  A
    particle active in no retained combination passes through unchanged.
    """
    if not combos:
        raise ValueError("cannot marginalize an empty combination list")
    out: list[GaussianParticle] = []
    for i, particle in enumerate(fov_particles):
        mine = [c for c in combos if c.bits[i]]
        if not mine:
            out.append(particle.copy())
            continue
        mix = np.array([c.posterior_weight for c in mine])
        weight = min(1.0, float(mix.sum()))
        if weight <= 0.0:
            out.append(GaussianParticle(0.0, particle.state.copy()))
            continue
        means = [c.updated_states[i].mean for c in mine]
        covs = [c.updated_states[i].cov for c in mine]
        mean, cov = mixture_moments(means, covs, mix)
        out.append(GaussianParticle(weight, GaussianState(mean, cov)))
    return out


def _pairwise_position_distances(
    particles: list[GaussianParticle], position_idx: tuple[int, ...]
) -> np.ndarray:
    """Mahalanobis distances between particle position marginals.

    d_ij = (mu_i - mu_j)' (Sigma_i + Sigma_j)^-1 (mu_i - mu_j) over the
    position components, computed for all pairs at once via closed-form
    1x1 / 2x2 inverses.  The diagonal is set to +inf.
    """
    idx = [i for i in position_idx if i < particles[0].state.dim]
    mx = np.array([p.state.mean[idx[0]] for p in particles])
    a = np.array([p.state.cov[idx[0], idx[0]] for p in particles])
    dx = mx[:, None] - mx[None, :]
    sa = a[:, None] + a[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        if len(idx) == 1:
            d = dx**2 / sa
        else:
            my = np.array([p.state.mean[idx[1]] for p in particles])
            b = np.array([p.state.cov[idx[0], idx[1]] for p in particles])
            c = np.array([p.state.cov[idx[1], idx[1]] for p in particles])
            sb = b[:, None] + b[None, :]
            sc = c[:, None] + c[None, :]
            det = sa * sc - sb**2
            dy = my[:, None] - my[None, :]
            d = (sc * dx**2 - 2.0 * sb * dx * dy + sa * dy**2) / det
    d[~np.isfinite(d)] = np.inf
    np.fill_diagonal(d, np.inf)
    return d


def merge_close_particles(
    pset: GpfParticleSet,
    d_thresh: float,
    position_idx: tuple[int, int] = POSITION_IDX,
    cov_mode: str = "moment",
) -> GpfParticleSet:
    """Greedily merge the closest particle pair until none is below d_thresh.

    Closeness is the Mahalanobis distance between position marginals with
    metric (Sigma_i + Sigma_j)^-1; qualifying means strictly below
    d_thresh.  Merging combines weights (capped at one) and moment-matches
    the Gaussians.
    """
    if d_thresh <= 0.0:
        raise ValueError(f"d_thresh must be positive, got {d_thresh}")
    particles = [p.copy() for p in pset.particles]
    while len(particles) > 1:
        d = _pairwise_position_distances(particles, position_idx)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] >= d_thresh:
            break
        lo, hi = min(i, j), max(i, j)
        merged = moment_match_merge([particles[lo], particles[hi]], cov_mode)
        particles.pop(hi)
        particles[lo] = merged
    return GpfParticleSet(particles, pset.step, pset.degenerate_step)


def estimate_cardinality(pset: GpfParticleSet) -> float:
    """Expected number of targets: the sum of existence weights."""
    return float(sum(p.weight for p in pset.particles))


def birth_and_prune(
    pset: GpfParticleSet,
    births: list[GaussianParticle],
    w_prune: float,
    n_max: int,
) -> GpfParticleSet:
    """Append birth particles, drop weights below w_prune, cap the count.

    When more than n_max particles survive, the n_max highest-weight ones
    are kept (ties broken by original order) and their ordering preserved.
    """
    if not 0.0 <= w_prune < 1.0:
        raise ValueError(f"w_prune must lie in [0, 1), got {w_prune}")
    particles = [p for p in list(pset.particles) + list(births) if p.weight >= w_prune]
    if len(particles) > n_max:
        by_weight = sorted(range(len(particles)), key=lambda i: -particles[i].weight)
        keep = sorted(by_weight[:n_max])
        particles = [particles[i] for i in keep]
    return GpfParticleSet(particles, pset.step, pset.degenerate_step)


def _mean_measurement_update(
    pset: GpfParticleSet, z: np.ndarray, config: GpfConfig
) -> tuple[GpfParticleSet, bool]:
    """Existence-combination update for a mean-of-states measurement."""
    sensor = config.sensor
    in_idx, _ = select_fov_particles(pset, config.fov, config.position_idx)
    if not in_idx:
        return pset, False
    fov_parts = [pset.particles[i] for i in in_idx]
    combos = enumerate_combinations(fov_parts, config.epsilon, config.s_max)
    if not combos:
        return pset, True

    proj = sensor.position_projection
    log_weights = []
    for combo in combos:
        log_weights.append(
            combination_log_weight(
                combo, fov_parts, z, sensor.R, config.clutter_density, proj
            )
        )
        for j, e in enumerate(combo.bits):
            if e:
                combo.updated_states[j] = conditional_kf_update(
                    j, combo.bits, fov_parts, z, sensor.R, proj
                ).posterior
    normalize_combination_weights(combos, log_weights)
    marginal = marginalize_existence(combos, fov_parts)

    particles = [p.copy() for p in pset.particles]
    for local_i, global_i in enumerate(in_idx):
        particles[global_i] = marginal[local_i]
    return GpfParticleSet(particles, pset.step, pset.degenerate_step), False


def grid_existence_update(
    pset: GpfParticleSet,
    returns: list[CellReturn],
    sensor: GridSensorModel,
    position_idx: tuple[int, int] = POSITION_IDX,
) -> GpfParticleSet:
    """Bayes update of existence weights from binary cell returns.

    Cell returns carry no useful state gradient, so the Gaussians are left
    alone and only the weights move.  For a particle whose mean lies in a
    measured cell, a return updates

        w <- w L(z | exists) / (w L(z | exists) + (1 - w) L(z | empty))

    where the exists-likelihood uses the single-target detection
    probability and the empty-likelihood the false-alarm probability.
    Particles outside every measured cell are unaffected.

    The weight entering the ratio is bounded away from the point masses 0
    and 1: merging can clamp a weight to exactly 1, and a degenerate prior
    would otherwise be immune to any amount of contrary evidence.
    """
    xi, yi = position_idx
    p_hit = detection_prob(1, sensor.p_d, sensor.snr)
    p_false = detection_prob(0, sensor.p_d, sensor.snr)
    bound = 1e-3
    out = []
    for p in pset.particles:
        w = p.weight
        x, y = p.state.mean[xi], p.state.mean[yi]
        for ret in returns:
            if not sensor.cell_contains(ret.cell_index, x, y):
                continue
            w = min(max(w, bound), 1.0 - bound)
            l_exists = p_hit if ret.value else 1.0 - p_hit
            l_empty = p_false if ret.value else 1.0 - p_false
            w = w * l_exists / (w * l_exists + (1.0 - w) * l_empty)
        out.append(GaussianParticle(w, p.state.copy()))
    return GpfParticleSet(out, pset.step, pset.degenerate_step)


def grid_births(
    returns: list[CellReturn], sensor: GridSensorModel, w_birth: float
) -> list[GaussianParticle]:
    """One birth hypothesis per positive return, centered on the cell.

    Position variance is that of a uniform draw over the cell (width^2/12);
    velocity starts at zero with unit variance.
    """
    cw, ch = sensor.cell_size()
    births = []
    for ret in returns:
        if ret.value != 1:
            continue
        cx, cy = sensor.cell_center(ret.cell_index)
        mean = np.array([cx, 0.0, cy, 0.0])
        cov = np.diag([cw**2 / 12.0, 1.0, ch**2 / 12.0, 1.0])
        births.append(GaussianParticle(w_birth, GaussianState(mean, cov)))
    return births


def gpf_step(
    pset: GpfParticleSet,
    z: np.ndarray | list[CellReturn],
    config: GpfConfig,
) -> GpfParticleSet:
    """One full filter iteration.

    Predict every particle, apply the measurement update matching the
    configured sensor (existence combinations for the mean sensor, weight
    Bayes rule plus births for the grid sensor), merge near-duplicate
    particles, then prune.  If no existence combination survives the
    threshold the measurement update is skipped and the returned set is
    flagged degenerate for this step.
    """
    predicted = gpf_predict(pset, config.f_matrix, config.q_matrix)
    degenerate = False
    if isinstance(config.sensor, MeanSensorModel):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        updated, degenerate = _mean_measurement_update(predicted, z, config)
        births: list[GaussianParticle] = []
    elif isinstance(config.sensor, GridSensorModel):
        if not all(isinstance(r, CellReturn) for r in z):
            raise TypeError("grid sensor expects a list of cell returns")
        updated = grid_existence_update(predicted, z, config.sensor, config.position_idx)
        births = grid_births(z, config.sensor, config.w_birth)
    else:
        raise TypeError(f"unsupported sensor type {type(config.sensor)!r}")
    merged = merge_close_particles(
        updated, config.d_thresh, config.position_idx, config.merge_cov
    )
    pruned = birth_and_prune(merged, births, config.w_prune, config.n_max)
    return GpfParticleSet(pruned.particles, pset.step + 1, degenerate)
