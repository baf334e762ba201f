"""Time-dependent Hawkes modelling, fitting and forecasting of re-share cascades."""

from .cascade import (
    DAY_SECONDS,
    HOUR_SECONDS,
    Cascade,
    Event,
    InfectiousRateParams,
    KernelParams,
    infectious_rate,
    intensity,
    kernel_integral,
    memory_kernel,
)
from .simulate import FollowerSampler, continue_cascade, simulate, simulate_batch
from .estimate import (
    DEFAULT_DELTA_OBS,
    TAU_M_MAX,
    TAU_M_MIN,
    FitResult,
    RateProfile,
    ShapeFit,
    fit_amplitude,
    fit_constant,
    fit_full,
    nelder_mead,
    rate_profile,
    shape_objective,
    train_shape,
    windowed_mle,
)
from .predict import (
    DEFAULT_STEP,
    DEFAULT_T_MAX,
    Forecast,
    activity_to_csv,
    forecast_to_csv,
    mean_followers,
    observed_drive,
    predict_activity,
    predict_final,
    prediction_bin_edges,
    solve_volterra,
)
from .baselines import (
    LrModel,
    RppModel,
    SeismicParams,
    delta_exposure,
    lr_fit,
    lr_predict,
    lrn_fit,
    lrn_predict,
    rpp_fit,
    rpp_gradient,
    rpp_log_likelihood,
    rpp_predict,
    seismic_predict_final,
)
from .metrics import error_per_hour, observed_activity
from .harness import (
    DATA_DIR_ENV,
    METHODS,
    EvalResult,
    ExperimentConfig,
    assign_folds,
    compare_methods,
    comparison_to_csv,
    load_cascade,
    load_corpus,
    run_experiment,
    save_cascade,
    save_corpus,
)
from . import errors

__version__ = "0.1.0"
