"""Multi-target tracking with Gaussian-particle, Kalman, and SIR filters."""

__version__ = "0.1.0"

from .gaussians import (
    GaussianParticle,
    GaussianState,
    SingularCovarianceError,
    log_pdf,
    mahalanobis_sq,
    moment_match_merge,
)
from .gpf import (
    CombinatorialBlowupError,
    ExistenceCombination,
    GpfConfig,
    GpfParticleSet,
    birth_and_prune,
    combination_weight,
    conditional_kf_update,
    enumerate_combinations,
    estimate_cardinality,
    gpf_predict,
    gpf_step,
    marginalize_existence,
    merge_close_particles,
    select_fov_particles,
)
from .kalman import KalmanUpdate, LinearGaussianModel, kf_predict, kf_update
from .particle import (
    PointParticleSet,
    effective_sample_size,
    pf_step,
    resample_multinomial,
    resample_systematic,
)
from .regions import FovRegion, Rectangle
from .sensors import (
    CellReturn,
    GridSensorModel,
    MeanSensorModel,
    detection_prob,
    grid_measure,
    make_grid,
    mean_sensor_measure,
    select_cells,
)
from .sim import (
    ExperimentSetup,
    MetricReport,
    ScenarioConfig,
    TrackingLog,
    evaluate_metrics,
    generate_truth,
    run_experiment,
)
