"""Entanglement-based multi-party clock synchronization: simulation and estimation."""
from ._accel import HAVE_NUMBA, backend
from .config import ExperimentConfig, SweepSpec, apply_noise
from .estimation import (
    AgreementCounts,
    EstimateReport,
    estimate_cos,
    invert_to_offset,
    predicted_std_error,
    tally_agreement,
    two_frequency_resolve,
)
from .protocol import Bulletin, BulletinRecord, Party, fetch, publish, run_protocol, synchronize
from .quantum import (
    PairDensity,
    QubitDensity,
    SingleExcitationState,
    concurrence,
    conditional_receiver_state,
    evolve_qubit,
    generalized_state,
    outcome_probabilities,
    pair_correlation,
    pair_density_computational,
    to_measurement_basis,
    w_state,
)
from .sampler import MeasurementSchedule, joint_distribution, measure_qubit, run_round

__version__ = "0.1.0"

__all__ = [
    "HAVE_NUMBA", "backend", "ExperimentConfig", "SweepSpec", "apply_noise",
    "AgreementCounts", "EstimateReport", "estimate_cos", "invert_to_offset", "predicted_std_error",
    "tally_agreement", "two_frequency_resolve", "Bulletin", "BulletinRecord", "Party", "fetch", "publish",
    "run_protocol", "synchronize", "PairDensity", "QubitDensity", "SingleExcitationState", "concurrence",
    "conditional_receiver_state", "evolve_qubit", "generalized_state", "outcome_probabilities",
    "pair_correlation", "pair_density_computational", "to_measurement_basis", "w_state",
    "MeasurementSchedule", "joint_distribution", "measure_qubit", "run_round",
]
