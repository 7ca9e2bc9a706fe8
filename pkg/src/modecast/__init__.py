"""Mode-decomposition toolkit for hourly series forecasting benchmarks."""

from .bench import (
    BoundaryDivergence,
    ScenarioReport,
    boundary_divergence,
    mape,
    rmse,
    run_benchmark_suite,
    run_scenario,
)
from .emd import (
    BoundaryPolicy,
    Decomposition,
    EnvelopePair,
    ExtremaSet,
    SiftConfig,
    emd,
    envelope,
    envelopes,
    extend_extrema,
    extract_imf,
    find_extrema,
    reconstruct,
    sift_once,
)
from .ensemble import EnsembleConfig, ceemd, eemd, reconstruction_snr, white_noise
from .exceptions import (
    ComputationError,
    ConvergenceError,
    CsvFormatError,
    DegenerateInputError,
    InputError,
    ModecastError,
    MonotoneInputError,
    SeriesTooShortError,
)
from .features import FeatureMatrix, build_lag_matrix, mrmr_select, mutual_information
from .pipeline import (
    ForecastConfig,
    ForecastModel,
    fit_forecaster,
    forecast_one,
    forecast_series,
)
from .predict import (
    ElmModel,
    GridSearchResult,
    SvrModel,
    elm_predict,
    elm_train,
    grid_search_cv,
    svr_predict,
    svr_train,
)
from .series import (
    ScaleParams,
    SynthSpec,
    TimeSeries,
    denormalize,
    load_csv,
    normalize,
    synth_generate,
    train_test_split,
)
from .spectral import PacfResult, Spectrogram, pacf, stft

__version__ = "0.1.0"
