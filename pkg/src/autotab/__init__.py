"""autotab: a budgeted tabular AutoML engine.

Library entry points: build a Dataset from a CSV or arrays, then fit_preset
(or utilized_fit for big budgets) and predict through the returned artifact.
"""

from .budget import TimeBudget
from .data import (Dataset, RawTable, Task, build_dataset, dataset_from_arrays,
                   read_csv)
from .encoders import EncoderSpec, norm_gini
from .errors import AutotabError, BudgetError, ConfigError, DataError
from .gbm import GBMParams
from .learners import LinearParams, TrainedModel, fit_gbm, fit_linear
from .metrics import MetricSpec, default_metric
from .pipeline import (AutoMLModel, PresetConfig, UtilizedModel, fit_preset,
                       predict_automl, utilized_fit)
from .validation import CVScheme, FoldAssignment, make_folds

__version__ = "0.1.0"

__all__ = [
    "AutoMLModel", "AutotabError", "BudgetError", "ConfigError", "CVScheme",
    "Dataset", "DataError", "EncoderSpec", "FoldAssignment", "GBMParams",
    "LinearParams", "MetricSpec", "PresetConfig", "RawTable", "Task",
    "TimeBudget", "TrainedModel", "UtilizedModel", "build_dataset",
    "dataset_from_arrays", "default_metric", "fit_gbm", "fit_linear",
    "fit_preset", "make_folds", "norm_gini", "predict_automl", "read_csv",
    "utilized_fit", "__version__",
]
