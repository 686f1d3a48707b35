"""sqzlab: a numerical laboratory for squeezed-light interferometry.

Simulates a continuous-wave Mach-Zehnder interferometer fed with
band-limited squeezed vacuum on both ports, recovers a differential
phase signal with a nonlinear dual-homodyne estimator, and checks the
estimator's noise floor against the analytic quantum bounds.
"""

__version__ = "0.1.0"

from .spectra import (
    VACUUM_LEVEL,
    Band,
    FluxReport,
    SqueezingSpec,
    db_to_r,
    effective_variances,
    photon_flux,
    r_for_flux,
)
from .synth import (
    FieldPair,
    QuadratureRecord,
    psd_shape,
    read_record,
    synth_squeezed_pair,
    write_record,
)
from .mzi import (
    HomodynePair,
    InterferometerConfig,
    PhaseSignal,
    output_variances,
    quadrature_transfer,
    scan_output_variance,
    transfer_exact,
    transfer_linearized,
)
from .estimator import (
    EstimatorConfig,
    PhaseEstimate,
    band_filter,
    calibrate_variances,
    down_mix_gain,
    estimate_phase,
    estimator_noise_psd_theory,
    filtered_unit_variance,
)
from .welch import (
    FloorAndTone,
    PsdEstimate,
    floor_and_tone,
    noise_floor,
    snr_statistic,
    tone_amplitude,
    welch_psd,
    write_psd_csv,
)
from .bounds import (
    BoundsReport,
    ScalingFit,
    bounds_report,
    fit_scaling,
    lossy_estimator_psd,
    lossy_floor_crosscheck,
    qcrb_two_squeezed,
    sql_line,
    sqz_coherent_homodyne,
    sqz_coherent_qcrb,
)
from .scan import (
    SweepPlan,
    SweepResult,
    SweepRow,
    VetoThresholds,
    apply_vetoes,
    derive_seed,
    run_flux_sweep,
    run_snr_map,
    simulate_point,
    write_manifest,
    write_sweep_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
