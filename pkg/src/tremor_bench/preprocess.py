"""Training-side preprocessing: MinMax scaling, LOF outlier removal and SMOTE.

Everything here is fitted on training rows only. The caller transforms
held-out rows with the returned :class:`ScalerParams` and nothing else.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import PreprocessError

LRD_DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class ScalerParams:
    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if not (len(self.x_min) == len(self.x_max) == len(self.feature_names)):
            raise PreprocessError("scaler parameter lengths differ")
        if any(lo > hi for lo, hi in zip(self.x_min, self.x_max)):
            raise PreprocessError("x_min exceeds x_max")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        d = json.loads(text)
        return cls(tuple(d["x_min"]), tuple(d["x_max"]), tuple(d["feature_names"]))


@dataclass(frozen=True)
class LofReport:
    k: int
    scores: tuple[float, ...]
    threshold: float
    kept_indices: tuple[int, ...]

    def to_json(self) -> str:
        d = asdict(self)
        # JSON has no infinity literal
        d["threshold"] = self.threshold if math.isfinite(self.threshold) else str(self.threshold)
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LofReport":
        d = json.loads(text)
        return cls(int(d["k"]), tuple(d["scores"]), float(d["threshold"]), tuple(d["kept_indices"]))


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise PreprocessError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not 0.0 < self.target_ratio <= 1.0:
            raise PreprocessError(f"target_ratio must be in (0, 1], got {self.target_ratio}")


def fit_minmax(train: LabeledDataset) -> ScalerParams:
    if train.n_samples == 0:
        raise PreprocessError("cannot fit a scaler on an empty dataset")
    return ScalerParams(
        x_min=tuple(float(v) for v in train.X.min(axis=0)),
        x_max=tuple(float(v) for v in train.X.max(axis=0)),
        feature_names=train.feature_names,
    )


def minmax_array(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    lo = np.asarray(params.x_min, dtype=float)
    hi = np.asarray(params.x_max, dtype=float)
    span = hi - lo
    out = np.zeros_like(np.asarray(X, dtype=float))
    live = span > 0
    out[:, live] = (X[:, live] - lo[live]) / span[live]
    return out


def transform_minmax(params: ScalerParams, ds: LabeledDataset) -> LabeledDataset:
    """Rescale with the fitted min/max. Constant columns map to 0; no clipping."""
    if tuple(ds.feature_names) != tuple(params.feature_names):
        raise PreprocessError("feature names of dataset and scaler differ")
    return ds.replace(X=minmax_array(params, ds.X))


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def lof_scores(X: np.ndarray, k: int) -> np.ndarray:
    """Local outlier factor of every row of ``X`` with Euclidean distance.

    The neighbourhood of a point holds every other point no farther than its
    k-th nearest neighbour, so ties at the k-distance are all included.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if k < 1:
        raise PreprocessError(f"LOF k must be >= 1, got {k}")
    if n <= k:
        raise PreprocessError(f"LOF needs more than k={k} points, got {n}")
    D = pairwise_distances(X)
    np.fill_diagonal(D, np.inf)
    k_dist = np.partition(D, k - 1, axis=1)[:, k - 1]
    nbr = D <= k_dist[:, None]
    n_nbr = nbr.sum(axis=1)
    reach = np.maximum(D, k_dist[None, :])
    reach_sum = np.where(nbr, reach, 0.0).sum(axis=1)
    lrd = n_nbr / np.maximum(reach_sum, LRD_DENOMINATOR_FLOOR)
    return (nbr @ lrd) / n_nbr / lrd


def remove_outliers(train: LabeledDataset, k: int, threshold: float) -> tuple[LabeledDataset, LofReport]:
    """Drop rows whose LOF exceeds ``threshold``; labels follow their rows."""
    if k < 1 or k >= train.n_samples:
        raise PreprocessError(f"LOF k={k} out of range for {train.n_samples} rows")
    scores = lof_scores(train.X, k)
    kept = np.flatnonzero(scores <= threshold)
    y_kept = train.y[kept]
    for label, name in ((1, train.positive_class_name), (0, train.negative_class_name)):
        if np.any(train.y == label) and not np.any(y_kept == label):
            raise PreprocessError(
                f"LOF threshold {threshold} would remove every {name} row; raise the threshold"
            )
    report = LofReport(
        k=k,
        scores=tuple(float(s) for s in scores),
        threshold=float(threshold),
        kept_indices=tuple(int(i) for i in kept),
    )
    return train.subset(kept), report


def minority_neighbors(Xm: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other minority rows, closest first (ties by index)."""
    D = pairwise_distances(Xm)
    np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def smote(train: LabeledDataset, cfg: SmoteConfig) -> LabeledDataset:
    """Oversample the minority class by interpolating towards minority neighbours.

    Originals keep their order and are followed by the synthetic rows, which
    carry row id -1.
    """
    counts = np.bincount(train.y, minlength=2)
    if counts.min() == 0:
        raise PreprocessError("SMOTE needs both classes present")
    minority = int(np.argmin(counts)) if counts[0] != counts[1] else 1
    n_min, n_maj = int(counts[minority]), int(counts[1 - minority])
    n_new = int(math.floor(cfg.target_ratio * n_maj + 0.5)) - n_min
    if n_new <= 0:
        return train
    if n_min <= cfg.k_neighbors:
        raise PreprocessError(
            f"minority class has {n_min} rows, SMOTE k_neighbors={cfg.k_neighbors} needs more"
        )

    rng = np.random.default_rng(cfg.seed)
    Xm = train.X[train.y == minority]
    nn = minority_neighbors(Xm, cfg.k_neighbors)
    base = rng.integers(0, n_min, size=n_new)
    pick = rng.integers(0, cfg.k_neighbors, size=n_new)
    delta = rng.random(n_new)
    partner = nn[base, pick]
    synthetic = Xm[base] + delta[:, None] * (Xm[partner] - Xm[base])
    return train.replace(
        X=np.vstack([train.X, synthetic]),
        y=np.concatenate([train.y, np.full(n_new, minority)]),
        row_ids=np.concatenate([train.row_ids, np.full(n_new, -1)]),
    )


@dataclass(frozen=True)
class PreprocessConfig:
    lof_k: int = 20
    lof_threshold: float = 1.5
    smote_k: int = 5
    smote_target_ratio: float = 1.0
    seed: int = 0


def preprocess_pipeline(
    train: LabeledDataset,
    lof_k: int = 20,
    threshold: float = 1.5,
    smote_cfg: SmoteConfig = None,
) -> tuple[LabeledDataset, ScalerParams, LofReport]:
    """Scale, remove outliers, then oversample; in that order.

    ``lof_k`` is capped at n-1 and the SMOTE neighbour count at
    (minority size - 1) after outlier removal.
    """
    smote_cfg = smote_cfg or SmoteConfig()
    params = fit_minmax(train)
    scaled = transform_minmax(params, train)
    k = min(lof_k, scaled.n_samples - 1)
    cleaned, report = remove_outliers(scaled, k, threshold)
    n_min = int(np.bincount(cleaned.y, minlength=2).min())
    if n_min < 2 and not _balanced(cleaned):
        raise PreprocessError(f"only {n_min} minority rows left after outlier removal")
    cfg = SmoteConfig(max(1, min(smote_cfg.k_neighbors, n_min - 1)), smote_cfg.target_ratio, smote_cfg.seed)
    return smote(cleaned, cfg), params, report


def _balanced(ds: LabeledDataset) -> bool:
    counts = np.bincount(ds.y, minlength=2)
    return counts[0] == counts[1]


def run_preprocessing(train: LabeledDataset, cfg: PreprocessConfig):
    """:func:`preprocess_pipeline` driven by a :class:`PreprocessConfig`."""
    return preprocess_pipeline(
        train, cfg.lof_k, cfg.lof_threshold,
        SmoteConfig(cfg.smote_k, cfg.smote_target_ratio, cfg.seed),
    )
