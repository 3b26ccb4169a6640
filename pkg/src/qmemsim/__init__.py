"""Deterministic simulator and estimation toolkit for a multi-channel
atomic quantum memory storing photonic polarization qubits.

The pipeline runs storage/retrieval physics (angle-dependent efficiency,
Gaussian-envelope dephasing, phase-matched readout angles), photon-count
simulation with background and finite detection efficiency, state and
process tomography from counts, and decay-model fitting, all seeded and
byte-reproducible.
"""

from .config import (
    CONFIG_SCHEMA,
    ScenarioConfig,
    config_from_dict,
    effective_config,
    load_config,
)
from .detection import (
    BASIS_DA,
    BASIS_HV,
    BASIS_RL,
    MEASUREMENT_BASES,
    CountRecord,
    DetectionConfig,
    MeasurementBasis,
    effective_detection_efficiency,
    expected_counts,
    expected_rates,
    postselected_state,
    sample_counts,
    total_detection_efficiency,
)
from .errors import ConfigError, FitError, QmemsimError
from .fitting import (
    DecayDataset,
    FitReport,
    calibrate_static_gamma,
    closed_form_fidelity,
    fidelity_at,
    fit_exponential,
    fit_sigma_gamma,
)
from .memory import (
    DEFAULT_CHANNELS,
    ChannelSpec,
    MemoryConfig,
    PhaseMatchConfig,
    RetrievalOutcome,
    dephase,
    dephase_kraus,
    dephasing_factor,
    release,
    retrieval_efficiency,
    theta_prime,
    walk_off_r0,
)
from .polarization import (
    NAMED_KETS,
    PAULI_BASIS,
    STATE_LABELS,
    density_from_stokes,
    density_of,
    ket_from_named,
    state_fidelity,
    stokes_of,
    uhlmann_fidelity,
)
from .scenarios import (
    DEFAULT_CALIBRATION_TARGETS,
    CALIBRATION_TARGET_ERRORS,
    RunArtifact,
    TABLE_TIME_MS,
    calibrate_table,
    derive_rng,
    emit,
    run_fig3,
    run_fig4,
    run_fig5,
    run_simulate,
    run_table1,
    tomography_point,
)
from .tomography import (
    ProcessResult,
    TomographyResult,
    apply_process,
    identity_chi,
    monte_carlo_error,
    process_fidelity,
    process_matrix,
    run_process_tomography,
    state_estimate,
    stokes_from_counts,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
