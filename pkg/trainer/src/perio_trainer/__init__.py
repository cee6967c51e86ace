"""perioseed-trainer: NER fine-tuning adapter for perioseed seed files."""

__version__ = "0.1.0"

from .normalization import most_severe, normalize_value, severity_key
from .prediction import predict
from .training import TrainConfig, TrainResult, train

__all__ = [
    "__version__",
    "TrainConfig", "TrainResult", "train", "predict",
    "normalize_value", "severity_key", "most_severe",
]
