import csv
import json
import math
import shutil

import pytest

from tremor_bench.cli import main
from tremor_bench.errors import ConfigError
from tremor_bench.experiment import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    EXIT_RUNTIME,
    config_from_dict,
    load_config,
)
from tremor_bench.report import render_report

SMALL = {
    "cv": {"folds": 3, "repeats": 1},
    "grid_cv": {"folds": 3, "repeats": 1},
    "selection_threshold": 0.5,
    "algorithms": ["DT", "KNN", "LR", "ADABOOST"],
    "grids": {"DT": {"max_depth": [3, None]}, "KNN": {"k": [3, 5]}, "LR": {"C": [1.0]},
              "ADABOOST": {"n_estimators": [10]}},
}


@pytest.fixture
def workdir(tmp_path, synthetic_dir):
    for name in ("synthetic.csv", "schema.json"):
        shutil.copy(synthetic_dir / name, tmp_path / name)
    return tmp_path


def write_config(directory, **changes):
    cfg = {"dataset": "synthetic.csv", "schema": "schema.json", "seed": 42, **SMALL, **changes}
    path = directory / "exp.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory, synthetic_dir):
    d = tmp_path_factory.mktemp("run")
    for name in ("synthetic.csv", "schema.json"):
        shutil.copy(synthetic_dir / name, d / name)
    cfg = write_config(d)
    assert main(["run", "--config", str(cfg), "--out", str(d / "out")]) == EXIT_OK
    return d


# ---- config ---------------------------------------------------------------

def test_config_nested_keys_and_overrides(tmp_path):
    cfg = config_from_dict({"dataset": "a.csv", "schema": "s.json", "cv": {"folds": 4, "repeats": 2},
                            "preprocess": {"lof_k": 7}}, base_dir=str(tmp_path), seed=None, subset="pdhc")
    assert (cfg.cv_folds, cfg.cv_repeats, cfg.lof_k, cfg.seed) == (4, 2, 7, 42)
    assert cfg.subsets == ("PDHC",)
    assert cfg.resolve("a.csv") == tmp_path / "a.csv"


@pytest.mark.parametrize("bad", [
    {"test_fraction": 1.5},
    {"cv": {"folds": 1}},
    {"cv": {"shuffle": True}},
    {"colour": "red"},
    {"algorithms": ["NB"]},
    {"model_overrides": {"SVM": {"degree": 3}}},
    {"grids": {"KNN": {"k": []}}},
    {"preprocess_mode": "lazy"},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        config_from_dict({"dataset": "a.csv", "schema": "s.json", **bad})


def test_config_requires_paths(tmp_path):
    with pytest.raises(ConfigError, match="dataset"):
        config_from_dict({"schema": "s.json"})
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(tmp_path / "bad.json")


# ---- end-to-end run -------------------------------------------------------

def test_run_writes_artifacts(small_run):
    out = small_run / "out"
    for name in ("report.json", "report.md", "timings.json"):
        assert (out / name).is_file()
    assert not (out / "INCOMPLETE").exists()
    for sub in ("pdrbd", "pdhc"):
        for name in ("scaler.json", "lof.json", "folds.json", "tuned.json"):
            assert (out / sub / name).is_file()
        assert sorted(p.stem for p in (out / sub / "models").glob("*.json"))


def test_report_audit_invariants(small_run):
    report = json.loads((small_run / "out" / "report.json").read_text())
    assert report["status"] == "complete"
    for name in ("PDRBD", "PDHC"):
        sec = report["subsets"][name]
        counts = sec["preprocessing"]["class_counts"]
        post = list(counts["post_smote"].values())
        assert post[0] == post[1]
        for c, v in counts["post_lof"].items():
            assert v <= counts["raw"][c]
        assert counts["test"] == sec["split"]["test_counts"]
        assert len(sec["validation"]) == 4
        for row in sec["test"]:
            assert 0 <= row["accuracy"] <= 1


def test_report_numbers_recomputable(small_run):
    report = json.loads((small_run / "out" / "report.json").read_text())
    for row in report["subsets"]["PDHC"]["validation"]:
        assert row["mean_accuracy"] == pytest.approx(sum(row["accuracies"]) / len(row["accuracies"]))
    for row in report["subsets"]["PDHC"]["test"]:
        cm = row["confusion"]
        assert row["accuracy"] == (cm["TP"] + cm["TN"]) / sum(cm.values())


def test_markdown_round_trip(small_run):
    text = (small_run / "out" / "report.json").read_text()
    md = (small_run / "out" / "report.md").read_text()
    assert render_report(json.loads(text), "markdown") == md
    assert render_report(json.loads(text), "json") == text
    assert "| Algorithm | Accuracy | PPV | TPR | F1-score | AUC |" in md
    assert "post-SMOTE" in md


def test_run_is_deterministic(small_run):
    cfg = small_run / "exp.json"
    assert main(["run", "--config", str(cfg), "--out", str(small_run / "again")]) == EXIT_OK
    first = (small_run / "out" / "report.json").read_bytes()
    assert (small_run / "again" / "report.json").read_bytes() == first


def test_evaluate_saved_models(small_run, capsys):
    cfg = small_run / "exp.json"
    code = main(["evaluate", "--config", str(cfg), "--models", str(small_run / "out"),
                 "--out", str(small_run / "eval")])
    assert code == EXIT_OK
    a = json.loads((small_run / "out" / "report.json").read_text())
    b = json.loads((small_run / "eval" / "report.json").read_text())
    for name in ("PDRBD", "PDHC"):
        assert a["subsets"][name]["test"] == b["subsets"][name]["test"]


def test_evaluate_without_models_fails(workdir):
    cfg = write_config(workdir)
    code = main(["evaluate", "--config", str(cfg), "--models", str(workdir / "none"),
                 "--out", str(workdir / "o")])
    assert code == EXIT_RUNTIME
    assert (workdir / "o" / "INCOMPLETE").is_file()


def test_validate_and_tune_subcommands(workdir):
    cfg = write_config(workdir, algorithms=["DT", "KNN"])
    assert main(["validate", "--config", str(cfg), "--subset", "pdhc", "--out", str(workdir / "v")]) == 0
    report = json.loads((workdir / "v" / "report.json").read_text())
    assert list(k for k in report["subsets"] if not k.startswith("_")) == ["PDHC"]
    assert "tuning" not in report["subsets"]["PDHC"]
    assert main(["tune", "--config", str(cfg), "--subset", "pdrbd", "--out", str(workdir / "t")]) == 0
    report = json.loads((workdir / "t" / "report.json").read_text())
    assert [t["algorithm"] for t in report["subsets"]["PDRBD"]["tuning"]] == ["DT", "KNN"]


def test_strict_mode_runs(workdir):
    cfg = write_config(workdir, algorithms=["DT"], grids={"DT": {"max_depth": [3]}})
    out = workdir / "s"
    assert main(["run", "--config", str(cfg), "--subset", "pdhc", "--preprocess-mode", "strict",
                 "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["config"]["preprocess_mode"] == "strict"


def test_seed_flag_changes_results(workdir):
    cfg = write_config(workdir, algorithms=["DT"], grids={"DT": {"max_depth": [3]}})
    main(["validate", "--config", str(cfg), "--seed", "1", "--out", str(workdir / "a")])
    main(["validate", "--config", str(cfg), "--seed", "2", "--out", str(workdir / "b")])
    a = json.loads((workdir / "a" / "report.json").read_text())
    b = json.loads((workdir / "b" / "report.json").read_text())
    assert a["config"]["seed"] == 1 and b["config"]["seed"] == 2
    assert a["subsets"]["PDHC"]["split"] != b["subsets"]["PDHC"]["split"]


# ---- exit codes -----------------------------------------------------------

def test_exit_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_exit_missing_dataset(workdir):
    cfg = write_config(workdir, dataset="absent.csv")
    assert main(["run", "--config", str(cfg), "--out", str(workdir / "o")]) == EXIT_CONFIG


def test_exit_bad_data(workdir):
    path = workdir / "synthetic.csv"
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows[1][rows[0].index("Age (years)")] = "old"
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    cfg = write_config(workdir)
    assert main(["run", "--config", str(cfg), "--out", str(workdir / "o")]) == EXIT_DATA
    assert (workdir / "o" / "INCOMPLETE").read_text().startswith("ingest")


def test_exit_fit_error(workdir, capsys):
    cfg = write_config(workdir, algorithms=["SVM"], model_overrides={"SVM": {"C": -1.0}},
                       grids={"SVM": {"C": [-1.0]}})
    code = main(["run", "--config", str(cfg), "--subset", "pdhc", "--out", str(workdir / "o")])
    assert code == EXIT_RUNTIME
    report = json.loads((workdir / "o" / "report.json").read_text())
    assert report["status"] == "incomplete"
    md = (workdir / "o" / "report.md").read_text()
    assert "incomplete" in md


def test_incomplete_report_renders_gaps():
    report = {"status": "incomplete", "failed_stage": "test", "error": "boom", "config": {"seed": 1},
              "subsets": {"PDHC": {"n_rows": 80, "n_features": 24,
                                   "test": [{"model": "DT", "accuracy": 0.5, "ppv": math.nan,
                                             "tpr": None, "f1": 0.0, "auc": None}]}}}
    md = render_report(report, "markdown")
    assert "| DT | 0.50 | n/a | n/a | 0.00 | n/a |" in md
    assert "Failed stage: `test`" in md
    json.loads(render_report(report, "json"))
    with pytest.raises(ValueError):
        render_report(report, "html")


# ---- utility subcommands --------------------------------------------------

def test_inspect_data(workdir, capsys):
    assert main(["inspect-data", "--dataset", str(workdir / "synthetic.csv"),
                 "--schema", str(workdir / "schema.json")]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == 130
    assert summary["group_counts"] == {"PD": 30, "RBD": 50, "HC": 50}
    assert summary["subsets"]["PDRBD"]["class_counts"] == {"PD": 30, "RBD": 50}
    assert summary["subsets"]["PDHC"]["rows"] == 80


def test_inspect_data_needs_inputs():
    assert main(["inspect-data"]) == EXIT_CONFIG


def test_make_synthetic(tmp_path, capsys):
    assert main(["make-synthetic", "--out", str(tmp_path), "--seed", "3"]) == EXIT_OK
    cfg = load_config(tmp_path / "experiment.json")
    assert cfg.resolve(cfg.dataset).is_file() and cfg.resolve(cfg.schema).is_file()
