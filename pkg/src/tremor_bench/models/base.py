"""Uniform fit / predict / decision-score contract over all classifiers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..dataset import LabeledDataset
from ..errors import ModelError
from ._tree import Forest, Tree

ALGORITHMS = ("SVM", "DT", "RF", "KNN", "LR", "GBOOST", "ADABOOST", "XGBOOST")

MODEL_FORMAT_VERSION = 1

DEFAULTS: dict[str, dict[str, Any]] = {
    "SVM": {"C": 1.0, "tol": 1e-3, "gamma": "scale", "max_passes": 10},
    "DT": {"criterion": "gini", "max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1},
    "RF": {"n_trees": 1000, "criterion": "gini", "max_features": "sqrt", "bootstrap": True,
           "max_depth": None},
    "KNN": {"k": 5},
    "LR": {"C": 1.0, "tol": 1e-4, "max_iter": 1000, "memory": 10},
    "GBOOST": {"learning_rate": 0.01, "n_stages": 1000, "max_depth": 3, "min_samples_leaf": 1},
    "ADABOOST": {"learning_rate": 1.0, "n_estimators": 50},
    "XGBOOST": {"eta": 0.3, "n_rounds": 1000, "lambda": 1.0, "max_depth": 6,
                "min_split_gain": 0.0, "min_child_weight": 1.0},
}

# Scores at or above the threshold predict the positive class.
# KNN vote ties go to class 0, so its cut sits just above one half.
THRESHOLDS = {
    "SVM": 0.0, "LR": 0.0, "GBOOST": 0.0, "ADABOOST": 0.0, "XGBOOST": 0.0,
    "DT": 0.5, "RF": 0.5, "KNN": float(np.nextafter(0.5, 1.0)),
}
MARGIN_SCORES = frozenset({"SVM", "LR", "GBOOST", "ADABOOST", "XGBOOST"})


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        algo = self.algorithm.upper()
        if algo not in DEFAULTS:
            raise ModelError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        unknown = sorted(set(self.hyperparameters) - set(DEFAULTS[algo]))
        if unknown:
            raise ModelError(f"{algo}: unrecognized hyperparameter(s) {unknown}")
        merged = dict(DEFAULTS[algo])
        merged.update(self.hyperparameters)
        object.__setattr__(self, "algorithm", algo)
        object.__setattr__(self, "hyperparameters", merged)

    @classmethod
    def create(cls, algorithm: str, seed: int = 0, **hyperparameters) -> "ModelSpec":
        return cls(algorithm, hyperparameters, seed)

    def with_params(self, **changes) -> "ModelSpec":
        hp = dict(self.hyperparameters)
        hp.update(changes)
        return ModelSpec(self.algorithm, hp, self.seed)

    def with_seed(self, seed: int) -> "ModelSpec":
        return ModelSpec(self.algorithm, self.hyperparameters, seed)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "hyperparameters": dict(self.hyperparameters),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(d["algorithm"], dict(d.get("hyperparameters", {})), int(d.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ModelSpec
    feature_count: int
    state: Mapping[str, Any]

    @property
    def algorithm(self) -> str:
        return self.spec.algorithm

    @property
    def threshold(self) -> float:
        return THRESHOLDS[self.algorithm]

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.feature_count)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ModelError(
                f"{self.algorithm} model expects {self.feature_count} columns, got shape {X.shape}"
            )
        return X

    def decision_score(self, X) -> np.ndarray:
        X = self._check(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        return _REGISTRY[self.algorithm].score(self.state, X)

    def predict(self, X) -> np.ndarray:
        return (self.decision_score(X) >= self.threshold).astype(np.int64)

    def probability(self, X) -> np.ndarray:
        """Positive-class probability used for log-loss: logistic of margins, clipped votes."""
        s = self.decision_score(X)
        if self.algorithm in MARGIN_SCORES:
            return _sigmoid(s)
        return np.clip(s, 0.0, 1.0)

    def to_json(self) -> str:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "feature_count": self.feature_count,
            "state": _encode(self.state),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ModelError(f"unsupported model format version {doc.get('format_version')!r}")
        return cls(ModelSpec.from_dict(doc["spec"]), int(doc["feature_count"]), _decode(doc["state"]))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass(frozen=True)
class _Entry:
    fit: Callable[[np.ndarray, np.ndarray, Mapping[str, Any], int], dict]
    score: Callable[[Mapping[str, Any], np.ndarray], np.ndarray]


_REGISTRY: dict[str, _Entry] = {}


def register(algorithm: str, fit_fn, score_fn) -> None:
    _REGISTRY[algorithm] = _Entry(fit_fn, score_fn)


def fit(spec: ModelSpec, train: LabeledDataset) -> TrainedModel:
    """Fit the classifier described by ``spec``; deterministic given ``spec.seed``."""
    X = np.asarray(train.X, dtype=float)
    y = np.asarray(train.y, dtype=np.int64)
    if X.shape[0] == 0 or len(np.unique(y)) < 2:
        raise ModelError(f"{spec.algorithm}: training data must contain both classes")
    if not np.all(np.isfinite(X)):
        raise ModelError(f"{spec.algorithm}: training features must be finite")
    state = _REGISTRY[spec.algorithm].fit(X, y, spec.hyperparameters, spec.seed)
    for value in state.values():
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
    return TrainedModel(spec, X.shape[1], state)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


def decision_score(model: TrainedModel, X) -> np.ndarray:
    return model.decision_score(X)


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, Tree):
        return {"__tree__": obj.to_dict()}
    if isinstance(obj, Forest):
        return {"__forest__": {k: _encode(getattr(obj, k)) for k in
                               ("feature", "threshold", "left", "right", "value", "roots")}}
    if isinstance(obj, Mapping):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else {"__float__": repr(f)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.asarray(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        if "__tree__" in obj:
            return Tree.from_dict(obj["__tree__"])
        if "__forest__" in obj:
            return Forest(**{k: _decode(v) for k, v in obj["__forest__"].items()})
        if "__float__" in obj:
            return float(obj["__float__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj
