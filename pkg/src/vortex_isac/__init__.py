"""Vortex-wavefront (OAM) integrated sensing and communication toolkit.

Synthesizes multi-target OFDM radar echoes under code-division
mode-multiplexing on a circular array, recovers range / azimuth /
elevation / velocity of moving targets with a Doppler-robust
consistency-matching EM estimator, and evaluates sensing-aided
communication beamforming and the pilot-length / spectral-efficiency
trade-off.
"""

from .config import (
    ConfigError,
    DerivedQuantities,
    Scenario,
    SystemConfig,
    Target,
    derive_quantities,
    load_run_file,
    table1_config,
    validate_scenario,
)
from .waveform import (
    CodeMatrix,
    ModeSet,
    PilotPlan,
    code_matrix,
    hadamard,
    identity_code,
    mode_set,
    pilots_all_ones,
    pilots_random_qpsk,
    precode_symbol,
    projection_matrix,
)
from .echo import (
    DataCube,
    TargetSteering,
    add_noise,
    doppler_of,
    load_cube,
    save_cube,
    steering_of,
    synth_raw_cube,
)
from .decode import (
    conj_decode_cube,
    conjugate_decode,
    decode_cube,
    decode_window,
    interference_diag,
    interference_matrix,
    tdmm_frame_cube,
    vandermonde_disturbance,
)
from .estimator import (
    EstimateSet,
    IterationTrace,
    ParameterEstimate,
    SearchGrids,
    TemplateBank,
    default_grids,
    nmse_db,
    run_vcm_em,
)
from .comm import (
    BeamWeights,
    LinkReport,
    approx_distance,
    beam_weights,
    detect_symbols,
    diagonal_series,
    effective_channel,
    exact_distance,
    link_report,
    los_channel,
)
from .harness import RunSpec, run_mc, run_sense, run_sweep_pilots, selftest

__version__ = "0.1.0"
