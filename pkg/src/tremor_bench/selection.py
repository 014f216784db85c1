"""Repeated stratified k-fold validation, model selection and grid search."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from ._parallel import ordered_map
from .dataset import LabeledDataset
from .errors import SelectionError, TremorBenchError
from .metrics import log_loss
from .models import ModelSpec, fit
from .preprocess import PreprocessConfig, minmax_array, run_preprocessing

log = logging.getLogger(__name__)

PREPROCESS_MODES = ("paper", "strict")

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "SVM": {"C": [0.1, 1.0, 10.0]},
    "DT": {"max_depth": [3, 6, None]},
    "RF": {"n_trees": [100, 500, 1000]},
    "KNN": {"k": [3, 5, 7]},
    "LR": {"C": [0.1, 1.0, 10.0]},
    "GBOOST": {"learning_rate": [0.001, 0.01, 0.1]},
    "ADABOOST": {"n_estimators": [25, 50, 100]},
    "XGBOOST": {"eta": [0.1, 0.3, 0.5]},
}

# hyperparameters where a smaller value means a simpler model, in priority order
COMPLEXITY_KEYS = ("n_stages", "n_rounds", "n_estimators", "n_trees", "C", "max_depth")


def derive_seed(*keys: int) -> int:
    """Independent 32-bit seed for the stream identified by ``keys``."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n_folds: int
    n_repeats: int
    assignments: tuple[tuple[np.ndarray, ...], ...]
    seed: int

    def splits(self):
        """Yield ``(repeat, fold, train_idx, held_out_idx)``."""
        for r, folds in enumerate(self.assignments):
            for f, held in enumerate(folds):
                train = np.sort(np.concatenate([folds[g] for g in range(self.n_folds) if g != f]))
                yield r, f, train, held

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "n_repeats": self.n_repeats,
            "seed": self.seed,
            "assignments": [[fold.tolist() for fold in rep] for rep in self.assignments],
        }


def stratified_kfold_plan(y, n_folds: int = 10, n_repeats: int = 10, seed: int = 0) -> FoldPlan:
    """Per repeat, shuffle each class and deal its rows round-robin into folds.

    The dealing position carries over from one class to the next so fold
    sizes differ by at most one.
    """
    y = np.asarray(y)
    if n_folds < 2 or n_repeats < 1:
        raise SelectionError("need n_folds >= 2 and n_repeats >= 1")
    classes = (1, 0)
    for c in classes:
        count = int(np.sum(y == c))
        if count < n_folds:
            raise SelectionError(f"class {c} has {count} rows, fewer than n_folds={n_folds}")
    assignments = []
    for r in range(n_repeats):
        rng = np.random.default_rng([seed, r])
        folds = [[] for _ in range(n_folds)]
        offset = 0
        for c in classes:
            perm = rng.permutation(np.flatnonzero(y == c))
            for i, row in enumerate(perm):
                folds[(offset + i) % n_folds].append(row)
            offset = (offset + len(perm)) % n_folds
        assignments.append(tuple(np.sort(np.asarray(f, dtype=np.int64)) for f in folds))
    return FoldPlan(n_folds, n_repeats, tuple(assignments), seed)


@dataclass(frozen=True)
class CVResult:
    spec: ModelSpec
    accuracies: tuple[float, ...]
    losses: tuple[float, ...]
    mean_accuracy: float
    validation_loss: float
    failures: tuple[dict, ...] = ()
    audit: tuple[dict, ...] = field(default=(), compare=False, repr=False)

    @property
    def complete(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "accuracies": list(self.accuracies),
            "losses": list(self.losses),
            "mean_accuracy": self.mean_accuracy,
            "validation_loss": self.validation_loss,
            "failures": list(self.failures),
            "complete": self.complete,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CVResult":
        return cls(
            ModelSpec.from_dict(d["spec"]),
            tuple(d["accuracies"]),
            tuple(d["losses"]),
            d["mean_accuracy"],
            d["validation_loss"],
            tuple(d.get("failures", ())),
        )


def _evaluate_fold(spec, ds, train_idx, held_idx, repeat, fold, mode, pre_cfg, keep_audit):
    train = ds.subset(train_idx)
    held = ds.subset(held_idx, degenerate=True)
    audit = None
    if mode == "strict":
        cfg = PreprocessConfig(pre_cfg.lof_k, pre_cfg.lof_threshold, pre_cfg.smote_k,
                               pre_cfg.smote_target_ratio, derive_seed(pre_cfg.seed, repeat, fold))
        train, params, _ = run_preprocessing(train, cfg)
        held_X = minmax_array(params, held.X)
        leaked = set(train.row_ids[train.row_ids >= 0].tolist()) & set(held.row_ids.tolist())
        if leaked:
            raise SelectionError(f"held-out rows {sorted(leaked)} reached the training portion")
        if keep_audit:
            audit = {"repeat": repeat, "fold": fold, "x_min": params.x_min, "x_max": params.x_max,
                     "train_row_ids": train.row_ids.copy(), "held_out_row_ids": held.row_ids.copy()}
    else:
        held_X = held.X
    model = fit(spec.with_seed(derive_seed(spec.seed, repeat, fold)), train)
    pred = model.predict(held_X)
    acc = float(np.mean(pred == held.y))
    loss = log_loss(held.y, model.probability(held_X))
    return acc, loss, audit


def cross_validate(
    spec: ModelSpec,
    ds: LabeledDataset,
    plan: FoldPlan,
    preprocess_mode: str = "paper",
    preprocess_cfg: Optional[PreprocessConfig] = None,
    keep_audit: bool = False,
) -> CVResult:
    """Fit on every training portion of ``plan`` and score the held-out rows.

    In ``paper`` mode ``ds`` is used as given (already preprocessed). In
    ``strict`` mode ``ds`` is raw and scaling, LOF and SMOTE are refitted on
    each training portion; held-out rows only see the fold's scaler.
    Folds whose fit raises are recorded as failures and skipped.
    """
    if preprocess_mode not in PREPROCESS_MODES:
        raise SelectionError(f"preprocess_mode must be one of {PREPROCESS_MODES}")
    if len(plan.assignments) and sum(len(f) for f in plan.assignments[0]) != ds.n_samples:
        raise SelectionError("fold plan does not match the dataset size")
    pre_cfg = preprocess_cfg or PreprocessConfig()

    def work(item):
        r, f, train_idx, held_idx = item
        try:
            return r, f, _evaluate_fold(spec, ds, train_idx, held_idx, r, f,
                                        preprocess_mode, pre_cfg, keep_audit), None
        except TremorBenchError as exc:
            log.warning("%s fold (%d, %d) failed: %s", spec.algorithm, r, f, exc)
            return r, f, None, str(exc)

    accs, losses, failures, audit = [], [], [], []
    for r, f, out, err in ordered_map(work, plan.splits()):
        if err is not None:
            failures.append({"repeat": r, "fold": f, "error": err})
            continue
        acc, loss, fold_audit = out
        accs.append(acc)
        losses.append(loss)
        if fold_audit is not None:
            audit.append(fold_audit)
    mean_acc = float(np.mean(accs)) if accs else math.nan
    mean_loss = float(np.mean(losses)) if losses else math.nan
    return CVResult(spec, tuple(accs), tuple(losses), mean_acc, mean_loss,
                    tuple(failures), tuple(audit))


def select_models(results: Sequence[CVResult], threshold: float = 0.90) -> list[ModelSpec]:
    """Specs whose mean validation accuracy reaches ``threshold``, best first."""
    if not results:
        raise SelectionError("no validation results to select from")
    kept = [r for r in results if not math.isnan(r.mean_accuracy) and r.mean_accuracy >= threshold]
    if all(math.isnan(r.mean_accuracy) for r in results):
        raise SelectionError("every fold of every model failed to fit; see the recorded failures")
    if not kept:
        best = max((r.mean_accuracy for r in results if not math.isnan(r.mean_accuracy)), default=math.nan)
        raise SelectionError(
            f"no model reached validation accuracy {threshold}; best was {best:.4f}, lower the threshold"
        )
    kept.sort(key=lambda r: -r.mean_accuracy)
    return [r.spec for r in kept]


@dataclass(frozen=True)
class ParamGrid:
    algorithm: str
    params: Mapping[str, Sequence[Any]]

    def __post_init__(self):
        if not self.params or any(len(v) == 0 for v in self.params.values()):
            raise SelectionError(f"{self.algorithm}: parameter grid must be non-empty")
        for cell in self.cells():
            ModelSpec(self.algorithm, cell)

    def cells(self) -> list[dict]:
        keys = list(self.params)
        return [dict(zip(keys, values)) for values in itertools.product(*(self.params[k] for k in keys))]


def complexity_key(spec: ModelSpec) -> tuple:
    hp = spec.hyperparameters
    return tuple(math.inf if hp.get(k) is None else hp[k] for k in COMPLEXITY_KEYS if k in hp)


def grid_search(
    spec: ModelSpec,
    grid: ParamGrid,
    ds: LabeledDataset,
    seed: int = 0,
    n_folds: int = 5,
    n_repeats: int = 5,
    preprocess_mode: str = "paper",
    preprocess_cfg: Optional[PreprocessConfig] = None,
) -> tuple[ModelSpec, list[CVResult]]:
    """Cross-validate every grid cell on one shared fold plan and pick the best.

    Highest mean accuracy wins; ties prefer the simpler cell (fewer stages,
    smaller C, shallower trees) and then grid order.
    """
    if grid.algorithm.upper() != spec.algorithm:
        raise SelectionError(f"grid for {grid.algorithm} used with a {spec.algorithm} spec")
    plan = stratified_kfold_plan(ds.y, n_folds, n_repeats, seed)
    table = []
    for cell in grid.cells():
        table.append(cross_validate(spec.with_params(**cell), ds, plan, preprocess_mode, preprocess_cfg))
    scored = [(i, r) for i, r in enumerate(table) if r.accuracies]
    if not scored:
        raise SelectionError(f"{spec.algorithm}: every grid cell failed to fit")
    best_i, _ = min(scored, key=lambda ir: (-ir[1].mean_accuracy, complexity_key(ir[1].spec), ir[0]))
    return table[best_i].spec, table
