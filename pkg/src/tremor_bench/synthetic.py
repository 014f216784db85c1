"""Synthetic stand-in for the PD/RBD/HC feature file.

Same shape as the clinical dataset: 30 PD, 50 RBD and 50 HC subjects, 64
features of which 6 are categorical, with the motor examination and the
disease-history fields left blank for healthy controls. Values are drawn
from simple per-group distributions; they carry signal but no clinical
meaning.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .dataset import MISSING, FeatureTable, Schema

GROUP_SIZES = {"PD": 30, "RBD": 50, "HC": 50}

CLINICAL_CATEGORICAL = (
    "Gender",
    "Positive history of Parkinson disease in family",
    "Antidepressant therapy",
    "Antiparkinsonian medication",
    "Antipsychotic medication",
    "Benzodiazepine medication",
)
HISTORY_NUMERIC = (
    "Age of disease onset (years)",
    "Duration of disease from first symptoms (years)",
    "Levodopa equivalent (mg/day)",
    "Clonazepam (mg/day)",
)
MOTOR = ("Hoehn & Yahr scale", "UPDRS III total") + tuple(f"UPDRS III item {i:02d}" for i in range(1, 34))
SPEECH_MEASURES = (
    "Entropy of speech timing",
    "Rate of speech timing",
    "Acceleration of speech timing",
    "Duration of pause intervals",
    "Duration of voiced intervals",
    "Gaping in-between voiced intervals",
    "Duration of unvoiced stops",
    "Decay of unvoiced fricatives",
    "Relative loudness of respiration",
)
SPEECH = tuple(f"{m} ({task})" for task in ("reading", "monologue") for m in SPEECH_MEASURES)

ID_COLUMN = "Participant code"
GROUP_COLUMN = "Group"

# recorded for PD and RBD only
HC_UNAVAILABLE = frozenset(
    ("Positive history of Parkinson disease in family",) + HISTORY_NUMERIC + MOTOR
)


def feature_columns() -> tuple[str, ...]:
    return ("Age (years)",) + CLINICAL_CATEGORICAL + HISTORY_NUMERIC + MOTOR + SPEECH


def synthetic_schema() -> Schema:
    features = feature_columns()
    kinds = ["ignore"] + ["categorical" if c in CLINICAL_CATEGORICAL else "numeric" for c in features] + ["group"]
    return Schema(columns=(ID_COLUMN,) + features + (GROUP_COLUMN,), kinds=tuple(kinds))


def _yes_no(rng, p):
    return "Yes" if rng.random() < p else "No"


def make_synthetic_table(seed: int = 0, speech_shift: float = 0.9) -> FeatureTable:
    """Draw one synthetic cohort; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    columns = feature_columns()
    motor_load = {"PD": 1.6, "RBD": 0.5}
    # per-measure speech effect for PD relative to the other groups
    speech_effect = rng.choice([-1.0, 1.0], size=len(SPEECH)) * speech_shift * rng.uniform(0.3, 1.0, len(SPEECH))
    rows, groups = [], []
    for group in ("PD", "RBD", "HC"):
        for _ in range(GROUP_SIZES[group]):
            cells = {}
            age = float(np.clip(np.round(rng.normal(64.5, 9.0)), 34, 83))
            cells["Age (years)"] = age
            cells["Gender"] = "Female" if rng.random() < (0.3 if group == "PD" else 0.18) else "Male"
            cells["Positive history of Parkinson disease in family"] = _yes_no(rng, 0.07 if group == "PD" else 0.02)
            cells["Antidepressant therapy"] = "No" if group == "HC" else _yes_no(rng, 0.1 if group == "PD" else 0.14)
            cells["Antiparkinsonian medication"] = "No"
            cells["Antipsychotic medication"] = "No"
            cells["Benzodiazepine medication"] = _yes_no(rng, 0.05 if group == "HC" else 0.3)
            duration = float(np.round(rng.gamma(2.0, 0.8 if group == "PD" else 2.9), 1))
            cells["Age of disease onset (years)"] = float(max(age - np.round(duration), 30.0))
            cells["Duration of disease from first symptoms (years)"] = duration
            cells["Levodopa equivalent (mg/day)"] = 0.0
            cells["Clonazepam (mg/day)"] = float(np.round(rng.choice([0.0, 0.5, 1.0], p=[0.6, 0.25, 0.15]), 2))
            if group != "HC":
                load = motor_load[group]
                items = np.clip(np.round(rng.gamma(load, 0.5, size=33)), 0, 4)
                cells["Hoehn & Yahr scale"] = float(np.clip(np.round(load + rng.normal(0, 0.3)), 0, 3))
                cells["UPDRS III total"] = float(items.sum())
                for name, v in zip(MOTOR[2:], items):
                    cells[name] = float(v)
            shift = speech_effect if group == "PD" else 0.4 * speech_effect if group == "RBD" else 0.0
            speech = rng.normal(0.0, 1.0, len(SPEECH)) + shift
            for name, v in zip(SPEECH, speech):
                cells[name] = float(np.round(50.0 + 10.0 * v, 3))
            row = tuple(MISSING if (group == "HC" and c in HC_UNAVAILABLE) else cells[c] for c in columns)
            rows.append(row)
            groups.append(group)
    kinds = tuple("categorical" if c in CLINICAL_CATEGORICAL else "numeric" for c in columns)
    encodings = {c: ({"Female": 1, "Male": 0} if c == "Gender" else {"Yes": 1, "No": 0})
                 for c in CLINICAL_CATEGORICAL}
    return FeatureTable(columns, kinds, tuple(rows), tuple(groups), GROUP_COLUMN, encodings)


def write_synthetic_dataset(out_dir: Union[str, Path], seed: int = 0) -> tuple[Path, Path]:
    """Write ``synthetic.csv`` and ``schema.json`` under ``out_dir``; return both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = make_synthetic_table(seed)
    csv_path = out / "synthetic.csv"
    counters = {g: 0 for g in GROUP_SIZES}
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow((ID_COLUMN,) + table.column_names + (GROUP_COLUMN,))
        for row, group in zip(table.rows, table.groups):
            counters[group] += 1
            cells = ["" if c is MISSING else (repr(c) if isinstance(c, float) else c) for c in row]
            writer.writerow([f"{group}{counters[group]:02d}"] + cells + [group])
    schema_path = out / "schema.json"
    schema_path.write_text(json.dumps(synthetic_schema().to_dict(), indent=2) + "\n", encoding="utf-8")
    return csv_path, schema_path
