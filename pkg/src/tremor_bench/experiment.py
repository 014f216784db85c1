"""End-to-end experiment driver: ingest, split, preprocess, validate, select,
tune, test, and persist every artifact."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import numpy as np

from . import __version__
from .dataset import (
    LabeledDataset,
    SplitPair,
    derive_subsets,
    encode_categoricals,
    load_csv,
    load_schema,
    stratified_split,
)
from .errors import (
    ConfigError,
    DatasetError,
    ModelError,
    PreprocessError,
    TremorBenchError,
)
from .metrics import evaluate
from .models import ALGORITHMS, ModelSpec, TrainedModel, fit
from .preprocess import (
    LofReport,
    PreprocessConfig,
    ScalerParams,
    run_preprocessing,
    transform_minmax,
)
from .selection import (
    DEFAULT_GRIDS,
    PREPROCESS_MODES,
    ParamGrid,
    cross_validate,
    derive_seed,
    grid_search,
    select_models,
    stratified_kfold_plan,
)

log = logging.getLogger(__name__)

SUBSETS = ("PDRBD", "PDHC")
REPORT_FORMAT_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: str
    subset: str = "both"
    test_fraction: float = 0.25
    seed: int = 42
    preprocess_mode: str = "paper"
    lof_k: int = 20
    lof_threshold: float = 1.5
    smote_k: int = 5
    cv_folds: int = 10
    cv_repeats: int = 10
    grid_folds: int = 5
    grid_repeats: int = 5
    selection_threshold: float = 0.90
    algorithms: tuple[str, ...] = ALGORITHMS
    model_overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    grids: Mapping[str, Mapping[str, list]] = field(default_factory=dict)
    out: str = "results"
    base_dir: str = "."

    def __post_init__(self):
        checks = [
            (0.0 < self.test_fraction < 1.0, "test_fraction must lie in (0, 1)"),
            (self.subset.lower() in ("pdrbd", "pdhc", "both"), "subset must be pdrbd, pdhc or both"),
            (self.preprocess_mode in PREPROCESS_MODES, f"preprocess_mode must be one of {PREPROCESS_MODES}"),
            (self.lof_k >= 1, "preprocess.lof_k must be >= 1"),
            (self.lof_threshold > 0, "preprocess.lof_threshold must be > 0"),
            (self.smote_k >= 1, "preprocess.smote_k must be >= 1"),
            (self.cv_folds >= 2 and self.cv_repeats >= 1, "cv needs folds >= 2 and repeats >= 1"),
            (self.grid_folds >= 2 and self.grid_repeats >= 1, "grid_cv needs folds >= 2 and repeats >= 1"),
            (0.0 <= self.selection_threshold <= 1.0, "selection_threshold must lie in [0, 1]"),
            (len(self.algorithms) > 0, "algorithms must not be empty"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        algos = tuple(a.upper() for a in self.algorithms)
        for a in algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        object.__setattr__(self, "algorithms", algos)
        try:
            for algo, hp in self.model_overrides.items():
                ModelSpec(algo, dict(hp))
            for algo, grid in self.grids.items():
                ParamGrid(algo.upper(), {k: list(v) for k, v in grid.items()})
        except TremorBenchError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def subsets(self) -> tuple[str, ...]:
        s = self.subset.upper()
        return SUBSETS if s == "BOTH" else (s,)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def preprocess_config(self, seed: int) -> PreprocessConfig:
        return PreprocessConfig(self.lof_k, self.lof_threshold, self.smote_k, 1.0, seed)

    def base_spec(self, algorithm: str, seed: int) -> ModelSpec:
        overrides = {k.upper(): v for k, v in self.model_overrides.items()}
        return ModelSpec(algorithm, dict(overrides.get(algorithm, {})), seed)

    def grid_for(self, algorithm: str) -> ParamGrid:
        grids = {k.upper(): v for k, v in self.grids.items()}
        params = grids.get(algorithm, DEFAULT_GRIDS[algorithm])
        return ParamGrid(algorithm, {k: list(v) for k, v in params.items()})

    def echo(self) -> dict:
        """Run-defining settings; output location and base directory excluded."""
        d = asdict(self)
        d.pop("out")
        d.pop("base_dir")
        d["algorithms"] = list(self.algorithms)
        return d


def config_from_dict(data: Mapping, base_dir: str = ".", **overrides) -> ExperimentConfig:
    data = dict(data)
    kwargs: dict[str, Any] = {"base_dir": str(base_dir)}
    nested = {
        "preprocess": {"lof_k": "lof_k", "lof_threshold": "lof_threshold", "smote_k": "smote_k"},
        "cv": {"folds": "cv_folds", "repeats": "cv_repeats"},
        "grid_cv": {"folds": "grid_folds", "repeats": "grid_repeats"},
    }
    for section, mapping in nested.items():
        block = data.pop(section, {}) or {}
        for key, value in block.items():
            if key not in mapping:
                raise ConfigError(f"unknown key {section}.{key}")
            kwargs[mapping[key]] = value
    known = {f for f in ExperimentConfig.__dataclass_fields__} - {"base_dir"}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = tuple(value) if key == "algorithms" else value
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    for required in ("dataset", "schema"):
        if required not in kwargs:
            raise ConfigError(f"config is missing {required!r}")
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, base_dir=str(path.parent), **overrides)


class StageError(TremorBenchError):
    """Failure inside one pipeline stage; carries the CLI exit code."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")

    @property
    def exit_code(self) -> int:
        if isinstance(self.cause, ConfigError):
            return EXIT_CONFIG
        if isinstance(self.cause, (DatasetError, PreprocessError)):
            return EXIT_DATA
        return EXIT_RUNTIME


def _counts(ds: LabeledDataset) -> dict[str, int]:
    return {k: int(v) for k, v in ds.class_counts().items()}


@dataclass
class SubsetRun:
    """Mutable scratchpad for one subset while the stages execute."""

    name: str
    data: LabeledDataset
    seed: int
    section: dict = field(default_factory=dict)
    split: Optional[SplitPair] = None
    clean: Optional[LabeledDataset] = None
    scaler: Optional[ScalerParams] = None
    lof: Optional[LofReport] = None
    test: Optional[LabeledDataset] = None
    plan: Any = None
    validation: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    tuned: list = field(default_factory=list)
    models: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    config: dict
    subsets: dict = field(default_factory=dict)
    status: str = "complete"
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    timings: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def to_dict(self) -> dict:
        """Canonical persisted form; timings are kept out so reruns are byte-identical."""
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "tool_version": __version__,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "config": self.config,
            "subsets": self.subsets,
        }


class Pipeline:
    """Runs the stages of one experiment and records their outputs."""

    def __init__(self, config: ExperimentConfig, out_dir: Optional[Path] = None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else config.resolve(config.out)
        self.report = ExperimentReport(config=config.echo())
        self.runs: dict[str, SubsetRun] = {}

    def stage(self, name: str, fn: Callable[[], Any]):
        start = time.perf_counter()
        try:
            return fn()
        except StageError:
            raise
        except TremorBenchError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.report.timings[name] = self.report.timings.get(name, 0.0) + time.perf_counter() - start

    # stages ---------------------------------------------------------------

    def ingest(self) -> None:
        cfg = self.config
        for label, path in (("dataset", cfg.dataset), ("schema", cfg.schema)):
            if not cfg.resolve(path).is_file():
                raise ConfigError(f"{label} file not found: {cfg.resolve(path)}")
        schema = load_schema(cfg.resolve(cfg.schema))
        table = encode_categoricals(load_csv(cfg.resolve(cfg.dataset), schema))
        pdrbd, pdhc = derive_subsets(table)
        self.report.subsets["_source"] = {"group_counts": table.group_counts(), "n_features": len(table.column_names)}
        for i, (name, ds) in enumerate(zip(SUBSETS, (pdrbd, pdhc))):
            if name in cfg.subsets:
                run = SubsetRun(name, ds, derive_seed(cfg.seed, i))
                run.section = {"n_rows": ds.n_samples, "n_features": ds.n_features,
                               "feature_names": list(ds.feature_names), "class_counts": _counts(ds)}
                self.runs[name] = run
                self.report.subsets[name] = run.section

    def split(self, run: SubsetRun) -> None:
        sp = stratified_split(run.data, self.config.test_fraction, self.config.seed)
        run.split = sp
        run.section["split"] = {
            "seed": sp.seed,
            "test_fraction": sp.test_fraction,
            "train_counts": _counts(sp.train),
            "test_counts": _counts(sp.test),
            "train_rows": sp.train.row_ids.tolist(),
            "test_rows": sp.test.row_ids.tolist(),
        }

    def preprocess(self, run: SubsetRun) -> None:
        pre_cfg = self.config.preprocess_config(derive_seed(run.seed, 2))
        clean, scaler, lof = run_preprocessing(run.split.train, pre_cfg)
        run.clean, run.scaler, run.lof = clean, scaler, lof
        run.test = transform_minmax(scaler, run.split.test)
        post_lof = run.split.train.subset(list(lof.kept_indices))
        run.section["preprocessing"] = {
            "lof_k": lof.k,
            "lof_threshold": lof.threshold,
            "n_outliers_removed": run.split.train.n_samples - len(lof.kept_indices),
            "n_synthetic": int(np.sum(clean.row_ids < 0)),
            "scaler": {"x_min": np.asarray(scaler.x_min).tolist(), "x_max": np.asarray(scaler.x_max).tolist()},
            "lof_scores": [float(v) for v in lof.scores],
            "lof_kept_indices": list(lof.kept_indices),
            "class_counts": {
                "raw": _counts(run.split.train),
                "post_lof": _counts(post_lof),
                "post_smote": _counts(clean),
                "test": _counts(run.test),
            },
        }

    def _cv_data(self, run: SubsetRun) -> LabeledDataset:
        return run.clean if self.config.preprocess_mode == "paper" else run.split.train

    def validate(self, run: SubsetRun) -> None:
        cfg = self.config
        data = self._cv_data(run)
        run.plan = stratified_kfold_plan(data.y, cfg.cv_folds, cfg.cv_repeats, derive_seed(run.seed, 3))
        pre_cfg = cfg.preprocess_config(derive_seed(run.seed, 4))
        run.validation = [
            cross_validate(cfg.base_spec(a, derive_seed(run.seed, 5)), data, run.plan,
                           cfg.preprocess_mode, pre_cfg)
            for a in cfg.algorithms
        ]
        run.section["validation"] = [r.to_dict() for r in run.validation]

    def select(self, run: SubsetRun) -> None:
        run.selected = select_models(run.validation, self.config.selection_threshold)
        run.section["selected"] = [s.algorithm for s in run.selected]

    def tune(self, run: SubsetRun, specs=None) -> None:
        cfg = self.config
        data = self._cv_data(run)
        pre_cfg = cfg.preprocess_config(derive_seed(run.seed, 4))
        specs = run.selected if specs is None else specs
        tuning = []
        run.tuned = []
        for spec in specs:
            best, table = grid_search(spec, cfg.grid_for(spec.algorithm), data, derive_seed(run.seed, 6),
                                      cfg.grid_folds, cfg.grid_repeats, cfg.preprocess_mode, pre_cfg)
            run.tuned.append(best)
            tuning.append({
                "algorithm": spec.algorithm,
                "best": best.to_dict(),
                "cells": [{"hyperparameters": dict(r.spec.hyperparameters),
                           "mean_accuracy": r.mean_accuracy,
                           "validation_loss": r.validation_loss,
                           "failures": len(r.failures)} for r in table],
            })
        run.section["tuning"] = tuning

    def test(self, run: SubsetRun, models: Optional[dict] = None) -> None:
        if models is None:
            models = {spec.algorithm: fit(spec, run.clean) for spec in run.tuned}
        run.models = models
        reports = []
        for algo, model in models.items():
            scores = model.decision_score(run.test.X)
            pred = model.predict(run.test.X)
            reports.append(evaluate(run.test.y, pred, scores, model=algo, subset=run.name).to_dict())
        run.section["test"] = reports

    # orchestration --------------------------------------------------------

    def execute(self, stages: tuple[str, ...], models_from: Optional[Path] = None) -> ExperimentReport:
        try:
            self.stage("ingest", self.ingest)
            for name, run in self.runs.items():
                self.stage("split", lambda: self.split(run))
                self.stage("preprocess", lambda: self.preprocess(run))
                if "validate" in stages:
                    self.stage("validate", lambda: self.validate(run))
                if "select" in stages:
                    self.stage("select", lambda: self.select(run))
                if "tune" in stages:
                    specs = None if "select" in stages else [
                        self.config.base_spec(a, derive_seed(run.seed, 5)) for a in self.config.algorithms]
                    self.stage("tune", lambda: self.tune(run, specs))
                if "test" in stages:
                    loaded = None
                    if models_from is not None:
                        loaded = self.stage("load-models", lambda: load_models(models_from / name.lower()))
                    self.stage("test", lambda: self.test(run, loaded))
        except StageError as exc:
            log.error("stage %s failed: %s", exc.stage, exc.cause)
            self.report.status = "incomplete"
            self.report.failed_stage = exc.stage
            self.report.error = str(exc.cause)
            self.report.exit_code = exc.exit_code
        self.write()
        return self.report

    def write(self) -> None:
        from .report import render_report

        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)
        doc = self.report.to_dict()
        (out / "report.json").write_text(render_report(doc, "json"), encoding="utf-8")
        (out / "report.md").write_text(render_report(doc, "markdown"), encoding="utf-8")
        timings = {k: round(v, 3) for k, v in self.report.timings.items()}
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
        marker = out / "INCOMPLETE"
        if self.report.status != "complete":
            marker.write_text(f"{self.report.failed_stage}: {self.report.error}\n", encoding="utf-8")
        elif marker.exists():
            marker.unlink()
        for name, run in self.runs.items():
            sub = out / name.lower()
            sub.mkdir(exist_ok=True)
            if run.scaler is not None:
                (sub / "scaler.json").write_text(run.scaler.to_json() + "\n", encoding="utf-8")
            if run.lof is not None:
                (sub / "lof.json").write_text(run.lof.to_json() + "\n", encoding="utf-8")
            if run.plan is not None:
                (sub / "folds.json").write_text(json.dumps(run.plan.to_dict()) + "\n", encoding="utf-8")
            if run.tuned:
                tuned = [s.to_dict() for s in run.tuned]
                (sub / "tuned.json").write_text(json.dumps(tuned, indent=2) + "\n", encoding="utf-8")
            if run.models:
                (sub / "models").mkdir(exist_ok=True)
                for algo, model in run.models.items():
                    (sub / "models" / f"{algo}.json").write_text(model.to_json() + "\n", encoding="utf-8")


def load_models(directory: Path) -> dict[str, TrainedModel]:
    model_dir = Path(directory) / "models"
    if not model_dir.is_dir():
        raise ModelError(f"no saved models under {model_dir}")
    paths = sorted(model_dir.glob("*.json"))
    tuned = Path(directory) / "tuned.json"
    if tuned.is_file():
        # keep the order the models were selected in
        rank = {d["algorithm"]: i for i, d in enumerate(json.loads(tuned.read_text(encoding="utf-8")))}
        paths.sort(key=lambda p: (rank.get(p.stem, len(rank)), p.stem))
    return {p.stem: TrainedModel.from_json(p.read_text(encoding="utf-8")) for p in paths}


STAGES = {
    "run": ("validate", "select", "tune", "test"),
    "validate": ("validate",),
    "tune": ("tune",),
    "evaluate": ("test",),
}


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Full workflow for every configured subset; artifacts land in ``out_dir``."""
    return Pipeline(config, out_dir).execute(STAGES["run"])
