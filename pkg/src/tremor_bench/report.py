"""Rendering of experiment reports as canonical JSON or Markdown tables."""
from __future__ import annotations

import json
import math
from typing import Any, Mapping, Optional

GAP = "n/a"

TEST_COLUMNS = (("Accuracy", "accuracy"), ("PPV", "ppv"), ("TPR", "tpr"),
                ("F1-score", "f1"), ("AUC", "auc"))
WEIGHTED_COLUMNS = (("Weighted PPV", "weighted_ppv"), ("Weighted TPR", "weighted_tpr"),
                    ("Weighted F1-score", "weighted_f1"))


def _json_safe(obj: Any) -> Any:
    """Replace non-finite floats, which JSON cannot represent."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else str(obj)
    if isinstance(obj, Mapping):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _fmt(value: Optional[float], digits: int = 4) -> str:
    if value is None or isinstance(value, str) or (isinstance(value, float) and math.isnan(value)):
        return GAP
    return f"{value:.{digits}f}"


def _table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def _markdown(report: Mapping) -> str:
    out = ["# Experiment report", ""]
    status = report.get("status", "complete")
    out.append(f"Status: **{status}**")
    if status != "complete":
        out.append(f"Failed stage: `{report.get('failed_stage')}`; error: {report.get('error')}")
        out.append("Sections below stop where the run stopped; missing values are shown as n/a.")
    cfg = report.get("config", {})
    out += ["", f"Seed {cfg.get('seed')}, preprocess mode `{cfg.get('preprocess_mode')}`, "
                f"test fraction {cfg.get('test_fraction')}, "
                f"CV {cfg.get('cv_folds')}x{cfg.get('cv_repeats')}, "
                f"grid CV {cfg.get('grid_folds')}x{cfg.get('grid_repeats')}, "
                f"selection threshold {cfg.get('selection_threshold')}."]
    for name, sec in report.get("subsets", {}).items():
        if name.startswith("_"):
            continue
        out += ["", f"## {name}", "",
                f"{sec.get('n_rows')} rows, {sec.get('n_features')} features."]
        split = sec.get("split")
        if split:
            out += ["", f"Train counts {split['train_counts']}; test counts {split['test_counts']}."]
        pre = sec.get("preprocessing")
        if pre:
            counts = pre["class_counts"]
            classes = list(counts["raw"])
            out += ["", "### Class counts per preprocessing stage", ""]
            out += _table(["Stage"] + classes,
                          [[label] + [counts[key].get(c, GAP) for c in classes]
                           for label, key in (("raw", "raw"), ("post-LOF", "post_lof"),
                                              ("post-SMOTE", "post_smote"), ("test", "test"))])
            out += ["", f"LOF k={pre['lof_k']}, threshold={pre['lof_threshold']}, "
                        f"outliers removed: {pre['n_outliers_removed']}, "
                        f"synthetic rows: {pre['n_synthetic']}."]
        validation = sec.get("validation")
        if validation:
            out += ["", "### Cross-validation", ""]
            out += _table(["Algorithm", "Mean accuracy", "Validation loss", "Evaluations", "Failures"],
                          [[v["spec"]["algorithm"], _fmt(v["mean_accuracy"]), _fmt(v["validation_loss"]),
                            len(v["accuracies"]), len(v["failures"])] for v in validation])
        if "selected" in sec:
            out += ["", "Selected: " + (", ".join(sec["selected"]) or "none")]
        tuning = sec.get("tuning")
        if tuning:
            out += ["", "### Grid search", ""]
            out += _table(["Algorithm", "Best hyperparameters", "Cells"],
                          [[t["algorithm"],
                            ", ".join(f"{k}={t['best']['hyperparameters'][k]}"
                                      for k in sorted(t["cells"][0]["hyperparameters"])),
                            len(t["cells"])] for t in tuning])
        test = sec.get("test")
        if test is not None:
            out += ["", "### Test set", ""]
            out += _table(["Algorithm"] + [h for h, _ in TEST_COLUMNS],
                          [[r["model"]] + [_fmt(r.get(k), 2) for _, k in TEST_COLUMNS] for r in test])
            out += ["", "### Test set, support-weighted", ""]
            out += _table(["Algorithm"] + [h for h, _ in WEIGHTED_COLUMNS],
                          [[r["model"]] + [_fmt(r.get(k), 2) for _, k in WEIGHTED_COLUMNS] for r in test])
    return "\n".join(out) + "\n"


def render_report(report: Mapping, fmt: str = "json") -> str:
    """Render a report dict (as produced by ``ExperimentReport.to_dict``).

    ``json`` is the canonical, byte-stable form; ``markdown`` mirrors the
    per-model result tables and marks anything missing as ``n/a``.
    """
    if fmt == "json":
        return json.dumps(_json_safe(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if fmt == "markdown":
        # render from the canonical form so a parsed JSON report gives the same text
        return _markdown(json.loads(render_report(report, "json")))
    raise ValueError(f"unknown report format {fmt!r}")
