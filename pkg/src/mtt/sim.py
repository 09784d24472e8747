"""Ground-truth scenario generation, tracking metrics, and the end-to-end
experiment loop wiring filters to sensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .gaussians import GaussianParticle, GaussianState, log_pdf
from .gpf import GpfConfig, GpfParticleSet, estimate_cardinality, gpf_step
from .kalman import LinearGaussianModel, kf_predict, kf_update
from .motion import POSITION_IDX, constant_velocity_matrix, position_projection
from .particle import PointParticleSet, pf_step
from .regions import Rectangle
from .sensors import (
    CellReturn,
    GridSensorModel,
    MeanSensorModel,
    grid_measure,
    mean_sensor_measure,
    select_cells,
)

FILTERS = ("gpf", "pf", "kf")
SENSORS = ("mean", "grid")


@dataclass
class ScenarioConfig:
    """Parameters of one simulated multi-target scenario."""

    n_targets: int = 3
    n_steps: int = 100
    tau: float = 1.0
    q_diag: tuple[float, float, float, float] = (20.0, 0.2, 20.0, 0.2)
    workspace: Rectangle = field(default_factory=lambda: Rectangle(0.0, 0.0, 12.0, 12.0))
    seed: int = 0
    initial_states: list[tuple[float, float, float, float]] | None = None

    def __post_init__(self) -> None:
        if self.n_targets < 0:
            raise ValueError("n_targets must be non-negative")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if len(self.q_diag) != 4:
            raise ValueError("q_diag must have four entries")
        if self.initial_states is not None:
            if len(self.initial_states) != self.n_targets:
                raise ValueError(
                    f"{len(self.initial_states)} initial states for "
                    f"{self.n_targets} targets"
                )


@dataclass
class StepRecord:
    """Everything logged about one time step."""

    step: int
    true_states: np.ndarray
    measurement: object
    means: list[np.ndarray]
    covs: list[np.ndarray]
    weights: list[float]
    cardinality: float
    rmse: float | None = None
    card_err: float | None = None
    ospa: float | None = None


@dataclass
class TrackingLog:
    records: list[StepRecord] = field(default_factory=list)


@dataclass
class MetricReport:
    rmse: list[float]
    card_err: list[float]
    ospa: list[float] | None = None


def generate_truth(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Simulate target trajectories; returns array (n_steps, n_targets, 4).

    Step 0 holds the initial states; each later step applies the
    constant-velocity transition plus N(0, diag(q_diag)) noise.  Targets
    are free to leave the workspace.
    """
    f = constant_velocity_matrix(config.tau)
    q_diag = np.asarray(config.q_diag, dtype=float)
    truth = np.zeros((config.n_steps, config.n_targets, 4))
    if config.n_targets == 0:
        return truth
    if config.initial_states is not None:
        truth[0] = np.asarray(config.initial_states, dtype=float)
    else:
        ws = config.workspace
        xs = rng.uniform(ws.x_min, ws.x_max, size=config.n_targets)
        ys = rng.uniform(ws.y_min, ws.y_max, size=config.n_targets)
        truth[0] = np.stack(
            [xs, np.zeros(config.n_targets), ys, np.zeros(config.n_targets)], axis=1
        )
    if np.any(q_diag < 0):
        raise ValueError("q_diag entries must be non-negative")
    scale = np.sqrt(q_diag)
    for k in range(1, config.n_steps):
        noise = rng.standard_normal((config.n_targets, 4)) * scale
        truth[k] = truth[k - 1] @ f.T + noise
    return truth


def assignment_rmse(
    estimates: list[np.ndarray],
    truths: list[np.ndarray],
    cap: float = 5.0,
) -> float:
    """Position RMSE under the minimum-cost estimate-to-truth assignment.

    Distances are capped at `cap`, unmatched truths cost the full cap, and
    the mean square is taken over the number of truths.  With no truths the
    result is 0 when there are also no estimates, else the cap.
    """
    n_true = len(truths)
    n_est = len(estimates)
    if n_true == 0:
        return 0.0 if n_est == 0 else cap
    if n_est == 0:
        return cap
    cost = np.zeros((n_est, n_true))
    for i, e in enumerate(estimates):
        for j, t in enumerate(truths):
            d = np.linalg.norm(np.asarray(e) - np.asarray(t))
            cost[i, j] = min(d, cap) ** 2
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + cap**2 * max(0, n_true - n_est)
    return float(np.sqrt(total / n_true))


def ospa_distance(
    estimates: list[np.ndarray], truths: list[np.ndarray], cap: float = 5.0, p: int = 2
) -> float:
    """OSPA metric between two point sets (order p, cutoff cap)."""
    m, n = len(estimates), len(truths)
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return cap
    cost = np.zeros((m, n))
    for i, e in enumerate(estimates):
        for j, t in enumerate(truths):
            cost[i, j] = min(np.linalg.norm(np.asarray(e) - np.asarray(t)), cap) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + cap**p * abs(m - n)
    return float((total / max(m, n)) ** (1.0 / p))


def extract_estimates(
    record: StepRecord,
    threshold: float,
    position_idx: tuple[int, int] = POSITION_IDX,
) -> list[np.ndarray]:
    """Means of particles whose existence weight clears the threshold."""
    idx = np.asarray(position_idx)
    return [
        np.asarray(m)[idx]
        for m, w in zip(record.means, record.weights)
        if w >= threshold
    ]


def evaluate_metrics(
    truth: np.ndarray,
    log: TrackingLog,
    extraction_threshold: float = 0.5,
    distance_cap: float = 5.0,
    with_ospa: bool = False,
) -> MetricReport:
    """Fill per-step RMSE and cardinality error into the log records.

    The cardinality error is |sum of weights - true target count|; the
    RMSE is assignment-based over extracted estimates (weight >= the
    extraction threshold) against true positions.
    """
    if len(truth) != len(log.records):
        raise ValueError(
            f"{len(truth)} truth steps but {len(log.records)} log records"
        )
    idx = np.asarray(POSITION_IDX)
    rmse_series: list[float] = []
    card_series: list[float] = []
    ospa_series: list[float] = []
    for k, record in enumerate(log.records):
        truths = [s[idx] for s in truth[k]]
        estimates = extract_estimates(record, extraction_threshold)
        rmse = assignment_rmse(estimates, truths, distance_cap)
        card_err = abs(record.cardinality - len(truths))
        record.rmse = rmse
        record.card_err = card_err
        rmse_series.append(rmse)
        card_series.append(card_err)
        if with_ospa:
            record.ospa = ospa_distance(estimates, truths, distance_cap)
            ospa_series.append(record.ospa)
    return MetricReport(rmse_series, card_series, ospa_series if with_ospa else None)


@dataclass
class ExperimentSetup:
    """Filter-side knobs for run_experiment beyond the scenario itself."""

    mean_r_diag: tuple[float, ...] = (0.5, 0.5)
    grid_rows: int = 12
    grid_cols: int = 12
    p_d: float = 0.9
    snr: float = 3.0
    m_cells: int = 12
    cell_strategy: str = "random"
    fixed_cells: list[int] | None = None
    gpf_epsilon: float = 0.01
    gpf_d_thresh: float = 1.0
    gpf_w_prune: float = 0.01
    gpf_n_max: int = 100
    gpf_w_birth: float = 0.1
    gpf_clutter_density: float | None = None
    gpf_merge_cov: str = "moment"
    gpf_s_max: int = 20
    gpf_init_weight: float = 0.9
    gpf_init_cov_diag: tuple[float, float, float, float] = (1.0, 0.1, 1.0, 0.1)
    pf_n_particles: int = 1000
    pf_ess_ratio: float = 0.5
    pf_resample: str = "multinomial"
    extraction_threshold: float = 0.5
    distance_cap: float = 5.0
    with_ospa: bool = False
    init_cov_diag: tuple[float, float, float, float] = (4.0, 1.0, 4.0, 1.0)


def _build_mean_sensor(setup: ExperimentSetup) -> MeanSensorModel:
    r = np.diag(np.asarray(setup.mean_r_diag, dtype=float))
    return MeanSensorModel(R=r, position_projection=position_projection(4))


def _build_grid_sensor(setup: ExperimentSetup, workspace: Rectangle) -> GridSensorModel:
    from .sensors import make_grid

    return make_grid(
        workspace,
        rows=setup.grid_rows,
        cols=setup.grid_cols,
        p_d=setup.p_d,
        snr=setup.snr,
        m_cells=setup.m_cells,
    )


def _summarize_gpf(pset: GpfParticleSet) -> tuple[list, list, list, float]:
    means = [p.state.mean.copy() for p in pset.particles]
    covs = [p.state.cov.copy() for p in pset.particles]
    weights = [p.weight for p in pset.particles]
    return means, covs, weights, estimate_cardinality(pset)


def run_experiment(
    config: ScenarioConfig,
    filter_choice: str,
    sensor_choice: str,
    rng: np.random.Generator,
    setup: ExperimentSetup | None = None,
) -> TrackingLog:
    """Full loop: truth step, sensor measurement, filter step, log record.

    Supported combinations: gpf with either sensor; kf and pf require the
    mean sensor view of a single target (they carry no association or
    cardinality machinery).  Metrics are filled in before returning.
    """
    setup = setup or ExperimentSetup()
    if filter_choice not in FILTERS:
        raise ValueError(f"unknown filter {filter_choice!r}")
    if sensor_choice not in SENSORS:
        raise ValueError(f"unknown sensor {sensor_choice!r}")
    if filter_choice in ("kf", "pf"):
        if sensor_choice != "mean" or config.n_targets != 1:
            raise ValueError(
                f"{filter_choice} supports only the mean sensor with one target"
            )

    truth = generate_truth(config, rng)
    f = constant_velocity_matrix(config.tau)
    q = np.diag(np.asarray(config.q_diag, dtype=float))
    log = TrackingLog()

    mean_sensor = _build_mean_sensor(setup)
    grid_sensor = (
        _build_grid_sensor(setup, config.workspace) if sensor_choice == "grid" else None
    )

    if filter_choice == "gpf":
        clutter = setup.gpf_clutter_density
        if clutter is None:
            clutter = 1.0 / config.workspace.area
        gpf_config = GpfConfig(
            f_matrix=f,
            q_matrix=q,
            sensor=grid_sensor if sensor_choice == "grid" else mean_sensor,
            epsilon=setup.gpf_epsilon,
            d_thresh=setup.gpf_d_thresh,
            w_prune=setup.gpf_w_prune,
            n_max=setup.gpf_n_max,
            w_birth=setup.gpf_w_birth,
            clutter_density=clutter,
            merge_cov=setup.gpf_merge_cov,
            s_max=setup.gpf_s_max,
        )
        particles: list[GaussianParticle] = []
        if sensor_choice == "mean":
            init_cov = np.diag(np.asarray(setup.gpf_init_cov_diag, dtype=float))
            for s in truth[0]:
                particles.append(
                    GaussianParticle(setup.gpf_init_weight, GaussianState(s.copy(), init_cov))
                )
        belief = GpfParticleSet(particles, step=0)
        for k in range(config.n_steps):
            if sensor_choice == "mean":
                z: object = mean_sensor_measure(list(truth[k]), mean_sensor, rng)
            else:
                cells = select_cells(
                    setup.cell_strategy, grid_sensor, rng, step=k, fixed=setup.fixed_cells
                )
                z = grid_measure(list(truth[k]), cells, grid_sensor, rng)
            belief = gpf_step(belief, z, gpf_config)
            means, covs, weights, card = _summarize_gpf(belief)
            log.records.append(
                StepRecord(k, truth[k].copy(), _encode_measurement(z), means, covs, weights, card)
            )
    elif filter_choice == "kf":
        model = LinearGaussianModel(
            F=f, Q=q, H=mean_sensor.position_projection, R=mean_sensor.R
        )
        center = np.array(
            [
                0.5 * (config.workspace.x_min + config.workspace.x_max),
                0.0,
                0.5 * (config.workspace.y_min + config.workspace.y_max),
                0.0,
            ]
        )
        belief_g = GaussianState(center, np.diag(np.asarray(setup.init_cov_diag)) * 100.0)
        for k in range(config.n_steps):
            z = mean_sensor_measure(list(truth[k]), mean_sensor, rng)
            belief_g = kf_update(kf_predict(belief_g, model), model, z).posterior
            log.records.append(
                StepRecord(
                    k,
                    truth[k].copy(),
                    _encode_measurement(z),
                    [belief_g.mean.copy()],
                    [belief_g.cov.copy()],
                    [1.0],
                    1.0,
                )
            )
    else:
        model = LinearGaussianModel(
            F=f, Q=q, H=mean_sensor.position_projection, R=mean_sensor.R
        )
        meas_state = GaussianState(np.zeros(mean_sensor.meas_dim), mean_sensor.R)

        def likelihood(state: np.ndarray, z: np.ndarray) -> float:
            return float(
                np.exp(log_pdf(meas_state, z - mean_sensor.position_projection @ state))
            )

        n = setup.pf_n_particles
        ws = config.workspace
        states = np.stack(
            [
                rng.uniform(ws.x_min, ws.x_max, size=n),
                rng.standard_normal(n),
                rng.uniform(ws.y_min, ws.y_max, size=n),
                rng.standard_normal(n),
            ],
            axis=1,
        )
        pset = PointParticleSet(states, np.full(n, 1.0 / n))
        for k in range(config.n_steps):
            z = mean_sensor_measure(list(truth[k]), mean_sensor, rng)
            pset = pf_step(
                pset,
                model,
                likelihood,
                z,
                rng,
                ess_ratio=setup.pf_ess_ratio,
                resample=setup.pf_resample,
            )
            est = pset.mean()
            log.records.append(
                StepRecord(
                    k,
                    truth[k].copy(),
                    _encode_measurement(z),
                    [est],
                    [np.cov(pset.states.T, aweights=pset.weights)],
                    [1.0],
                    1.0,
                )
            )

    evaluate_metrics(
        truth,
        log,
        extraction_threshold=setup.extraction_threshold,
        distance_cap=setup.distance_cap,
        with_ospa=setup.with_ospa,
    )
    return log


def _encode_measurement(z: object) -> object:
    """Normalize a measurement for logging (arrays to lists, returns to pairs)."""
    if isinstance(z, np.ndarray):
        return z.tolist()
    if isinstance(z, list) and all(isinstance(r, CellReturn) for r in z):
        return [(r.cell_index, r.value) for r in z]
    return z
