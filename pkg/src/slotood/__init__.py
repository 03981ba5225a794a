"""Object co-occurrence OOD detection over slot-attention outputs."""

__version__ = "0.1.0"

from .patterns import CoOccurrenceTable, build_table, frequency_set
from .scoring import ScoredSample, oco_score, score_sample
from .evaluation import MetricsReport, evaluate

__all__ = [
    "__version__",
    "CoOccurrenceTable",
    "build_table",
    "frequency_set",
    "ScoredSample",
    "oco_score",
    "score_sample",
    "MetricsReport",
    "evaluate",
]
