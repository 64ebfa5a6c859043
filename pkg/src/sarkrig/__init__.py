"""Sparse lattice-basis spatial modeling with anisotropic local precision.

The package covers the full loop: build a compactly supported basis on a
buffered lattice, tie the coefficients together with a nine-point
autoregressive precision operator whose anisotropy varies by node,
simulate and standardize replicate fields, estimate parameters by
profile likelihood, krige with exact sparse identities, correct the
precision level for areally supported data, and report calibration
metrics end to end.
"""

from .config import (
    RunConfig,
    StationFilterConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .cosp import (
    ArealPartition,
    KappaAdjustment,
    WeightMask,
    adjust_kappa,
    areal_average,
    areal_covariance,
    averaged_basis,
    eta1_covariance,
    mask_from_stack,
    mask_to_stack,
    refine_kappa_point,
)
from .errors import NumericalError, SarKrigError, ValidationError
from .gridstack import (
    GridStack,
    params_from_stack,
    params_to_stack,
    read_gridstack,
    write_gridstack,
)
from .kriging import KrigingModel, KrigingResult, krige
from .lattice import (
    BasisMatrix,
    BasisSpec,
    LatticeGrid,
    build_lattice,
    evaluate_basis,
    wendland,
)
from .likelihood import (
    CovParams,
    MleResult,
    SearchConfig,
    fit_lambda_mle,
    fit_stationary_mle,
    log_likelihood,
    mle_small_grid_oracle,
    profile_loglik,
    stationary_cov,
)
from .meanmodel import ObservationSet, RegressionFit, dedupe_observations, fit_mean_arx1
from .pipeline import (
    build_window_ensembles,
    cv_day,
    fit_day_variant,
    fit_gridded_day,
    fit_gridded_mean,
    pixel_centers,
    reconstruct_day,
    render_png,
    resample_average,
    resample_nearest,
    run_cv,
    run_predict_fine,
    run_reconstruction,
    run_station_day,
    select_observed_pixels,
    write_metrics_json,
)
from .sar import (
    DispersionMatrix,
    ParamFields,
    Stencil9,
    build_sar,
    constant_params,
    dispersion_matrix,
    precision,
    stationary_stencil,
    stencil_at,
)
from .simulate import (
    FieldEnsemble,
    PriorConfig,
    TrainingPair,
    coefficients_from_noise,
    ensemble_from_stack,
    ensemble_to_stack,
    generate_training_set,
    make_training_pair,
    sample_param_fields,
    simulate_coefficients,
    simulate_fields,
    split_sizes,
    standardize_ensemble,
)
from .stations import CleaningReport, ingest_stations
from .uq import (
    ConditionalEnsemble,
    FoldAssignment,
    UQMetrics,
    compute_metrics,
    compute_metrics_from_ensemble,
    conditional_simulate,
    ensemble_interval,
    kfold_assign,
    summarize_uncertainty,
)

__version__ = "0.1.0"

__all__ = [
    "ArealPartition",
    "BasisMatrix",
    "BasisSpec",
    "CleaningReport",
    "ConditionalEnsemble",
    "CovParams",
    "DispersionMatrix",
    "FieldEnsemble",
    "FoldAssignment",
    "GridStack",
    "KappaAdjustment",
    "KrigingModel",
    "KrigingResult",
    "LatticeGrid",
    "MleResult",
    "NumericalError",
    "ObservationSet",
    "ParamFields",
    "PriorConfig",
    "RegressionFit",
    "RunConfig",
    "SarKrigError",
    "SearchConfig",
    "StationFilterConfig",
    "Stencil9",
    "TrainingPair",
    "UQMetrics",
    "ValidationError",
    "WeightMask",
    "adjust_kappa",
    "apply_overrides",
    "areal_average",
    "areal_covariance",
    "averaged_basis",
    "build_lattice",
    "build_sar",
    "build_window_ensembles",
    "coefficients_from_noise",
    "compute_metrics",
    "compute_metrics_from_ensemble",
    "conditional_simulate",
    "config_from_dict",
    "config_to_dict",
    "constant_params",
    "cv_day",
    "dedupe_observations",
    "dispersion_matrix",
    "ensemble_from_stack",
    "ensemble_interval",
    "ensemble_to_stack",
    "eta1_covariance",
    "evaluate_basis",
    "fit_day_variant",
    "fit_gridded_day",
    "fit_gridded_mean",
    "fit_lambda_mle",
    "fit_mean_arx1",
    "fit_stationary_mle",
    "generate_training_set",
    "ingest_stations",
    "kfold_assign",
    "krige",
    "load_config",
    "log_likelihood",
    "make_training_pair",
    "mask_from_stack",
    "mask_to_stack",
    "mle_small_grid_oracle",
    "params_from_stack",
    "params_to_stack",
    "pixel_centers",
    "precision",
    "profile_loglik",
    "read_gridstack",
    "reconstruct_day",
    "refine_kappa_point",
    "render_png",
    "resample_average",
    "resample_nearest",
    "run_cv",
    "run_predict_fine",
    "run_reconstruction",
    "run_station_day",
    "sample_param_fields",
    "select_observed_pixels",
    "simulate_coefficients",
    "simulate_fields",
    "split_sizes",
    "standardize_ensemble",
    "stationary_cov",
    "stationary_stencil",
    "stencil_at",
    "summarize_uncertainty",
    "wendland",
    "write_gridstack",
    "write_metrics_json",
]
