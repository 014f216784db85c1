"""Binary PD classification benchmark on clinical and speech features.

Ingests the PD/RBD/HC feature table, builds the PD-vs-RBD and PD-vs-HC
subsets, applies MinMax scaling, LOF outlier removal and SMOTE, and
compares eight classifiers through repeated stratified cross-validation,
grid search and a held-out test split.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DatasetError,
    ModelError,
    PreprocessError,
    SelectionError,
    TremorBenchError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DatasetError",
    "ModelError",
    "PreprocessError",
    "SelectionError",
    "TremorBenchError",
]
