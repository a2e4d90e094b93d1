"""N-BEATS forecasting of ICU mean blood pressure with trend/seasonality analysis."""
from .analysis import (
    DrugEvent,
    MismatchRecord,
    OutcomeLabel,
    actual_trend,
    build_records,
    drug_overlap,
    forecast_trend,
    mortality_split,
    rank_mismatch,
)
from .data_io import (
    DatasetBundle,
    Settings,
    SyntheticSpec,
    generate_synthetic,
    load_bundle,
    load_config,
    split_by_patient,
)
from .metrics import EvalReport, dtw, evaluate, mape, mse, persistence_forecast
from .nbeats import (
    Configuration,
    ForecastDecomposition,
    ModelConfig,
    NBeatsModel,
    build_model,
    build_seasonality_basis,
    build_trend_basis,
    model_forward,
)
from .preprocess import PipelineConfig, RawSeries, TimeSeriesWindow, run_pipeline
from .serialization import load_model, save_model
from .training import TrainConfig, train

__version__ = "0.1.0"
