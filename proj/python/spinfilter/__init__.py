"""Simulation and estimation toolkit for a double-pass continuously measured
atomic magnetometer: collective spin algebra, stochastic Schroedinger / adjoint
filter integration, quantum Cramer-Rao bounds, and particle / projection /
Kalman field estimators."""

from ._spinfilter import (
    Estimate,
    GaussianState,
    KalmanTrace,
    MeasurementRecord,
    ModelParams,
    PfRunResult,
    PfTrace,
    PowerLawFit,
    QfiSample,
    ScalingPoint,
    SpinOperators,
    SpinfilterError,
    SseTrajectory,
    bound_sweep,
    build_spin_operators,
    expectation,
    generate_record,
    heisenberg_bound,
    innovations,
    kalman_variance_rhs,
    kbody_bound,
    load_record_binary,
    load_record_csv,
    power_law_fit,
    projection_innovations,
    projection_step,
    q_function,
    qfi_sample,
    rotation_y,
    run_config,
    run_kalman_covariance,
    run_kalman_filter,
    run_particle_filter,
    run_sse_trajectory,
    sample_deviation,
    save_record_binary,
    save_record_csv,
    seed_for,
    shotnoise_bound,
    spin_coherent_state,
    spin_dimension,
    squeezing_operator,
    sse_ito_step,
    wiener_path,
    xi_closed_form,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
