"""Simulation and fidelity estimation for sequential GHZ photon generation from a Rydberg superatom."""

__version__ = "0.1.0"

from .channels import (
    DetectionRecord,
    ErrorModelParams,
    analytic_flip_rates,
    apply_accumulation,
    detect,
    detect_batch,
    sample_iteration_events,
)
from .config import SimConfig, emit_config, load_config, parse_config
from .engine import Campaign, predicted_rate, run_campaign, run_setting
from .estimation import (
    Estimate,
    FidelityReport,
    ScalingFit,
    afterpulse_correct,
    analyze_tables,
    eigen_fidelity,
    fit_scaling,
    phase_calibration,
    poisson_error,
    superposition_fidelity,
    total_fidelity,
)
from .events import Failure, IterationEvents
from .exceptions import (
    ConfigError,
    DataError,
    GHZSimError,
    InvalidArgumentError,
    InvalidStateError,
    NoSignalError,
    UndefinedValueError,
)
from .measurement import (
    CoincidenceTable,
    MeasurementSetting,
    OutcomeDistribution,
    PartialEvent,
    correlation_value,
    g2_estimate,
    make_setting,
    outcome_distribution,
    sample_outcome,
    tabulate,
)
from .oracle import enumerate_events, exact_distribution, exact_fidelity
from .phase import PhaseNoiseParams, beta_phi, dephasing_factor, sample_phase_offset
from .protocol import Branch, TwoBranchState, finalize, ideal_state, prepare_initial, run_iteration, to_time_bin
