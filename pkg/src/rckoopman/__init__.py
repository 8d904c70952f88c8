"""Koopman identification with reservoir-computing dictionaries, plus EDMD and Hankel baselines."""

from .diagnostics import (
    ConditioningReport,
    ObservabilityPoint,
    autocorrelation,
    conditioning,
    eigenvalue_lifetimes,
    observability_scan,
    select_spectral_radius,
)
from .dynamics import (
    DIFFDRIVE,
    DUFFING,
    SystemSpec,
    TrajectoryData,
    diffdrive_step,
    duffing_step,
    generate_trajectory,
    get_system,
)
from .koopman import KoopmanModel, evaluate_onestep, identify, predict_onestep, rollout, spectrum
from .lifting import (
    HankelDictionary,
    LiftedSnapshots,
    RBFDictionary,
    ReservoirDictionary,
    concat_snapshots,
    lift_hankel,
    lift_rbf,
    lift_reservoir,
)
from .pipeline import ExperimentConfig, run_benchmark, run_cell, write_benchmark
from .reservoir import (
    MemoryHorizon,
    Reservoir,
    ReservoirConfig,
    build_reservoir,
    check_esp,
    drive,
    memory_horizon,
    sensitivity_profile,
)

__version__ = "0.1.0"
