import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import largest_remainder
from tremor_bench.dataset import (
    MISSING,
    FeatureTable,
    LabeledDataset,
    Schema,
    allocate_largest_remainder,
    derive_subsets,
    encode_categoricals,
    load_csv,
    load_schema,
    stratified_split,
    write_csv,
)
from tremor_bench.errors import DatasetError
from tremor_bench.synthetic import HC_UNAVAILABLE, synthetic_schema


def small_schema():
    return Schema(columns=("id", "Age", "Gender", "Motor", "Group"),
                  kinds=("ignore", "numeric", "categorical", "numeric", "group"))


def write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---- load_csv ------------------------------------------------------------

def test_synthetic_file_group_counts(synthetic_dir):
    table = load_csv(synthetic_dir / "synthetic.csv", load_schema(synthetic_dir / "schema.json"))
    assert table.group_counts() == {"PD": 30, "RBD": 50, "HC": 50}
    assert table.n_rows == 130
    assert len(table.column_names) == 64


def test_empty_file_with_header(tmp_path):
    path = write(tmp_path / "d.csv", ["id,Age,Gender,Motor,Group"])
    table = load_csv(path, small_schema())
    assert table.n_rows == 0


def test_blank_motor_cell_is_missing(tmp_path):
    path = write(tmp_path / "d.csv", ["id,Age,Gender,Motor,Group", "h1,61,Male,,HC", "p1,70,Female,12,PD"])
    table = load_csv(path, small_schema())
    assert table.n_rows == 2
    assert table.rows[0][2] is MISSING
    assert table.rows[1][2] == 12.0


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "none.csv", small_schema())


def test_header_mismatch_names_column(tmp_path):
    path = write(tmp_path / "d.csv", ["id,Age,Sex,Motor,Group"])
    with pytest.raises(DatasetError, match="'Gender'"):
        load_csv(path, small_schema())


def test_wrong_cell_count_names_row(tmp_path):
    path = write(tmp_path / "d.csv", ["id,Age,Gender,Motor,Group", "a,1,Male,2,PD", "b,1,Male,PD"])
    with pytest.raises(DatasetError, match="row 1"):
        load_csv(path, small_schema())


@pytest.mark.parametrize("cell", ["abc", "nan", "inf"])
def test_bad_numeric_cell(tmp_path, cell):
    path = write(tmp_path / "d.csv", ["id,Age,Gender,Motor,Group", f"a,{cell},Male,2,PD"])
    with pytest.raises(DatasetError, match="Age"):
        load_csv(path, small_schema())


def test_unknown_group_label(tmp_path):
    path = write(tmp_path / "d.csv", ["id,Age,Gender,Motor,Group", "a,1,Male,2,XX"])
    with pytest.raises(DatasetError, match="XX"):
        load_csv(path, small_schema())


def test_schema_json_round_trip(tmp_path):
    schema = synthetic_schema()
    path = tmp_path / "s.json"
    path.write_text(json.dumps(schema.to_dict()))
    assert load_schema(path) == schema


def test_csv_round_trip(raw_table, tmp_path):
    path = tmp_path / "t.csv"
    write_csv(raw_table, path)
    again = load_csv(path, raw_table.schema())
    assert again.column_names == raw_table.column_names
    assert again.rows == raw_table.rows
    assert again.groups == raw_table.groups


# ---- encode_categoricals --------------------------------------------------

def test_gender_and_yes_no_encoding(tmp_path):
    schema = Schema(columns=("Gender", "Antiparkinsonian medication", "Age", "Group"),
                    kinds=("categorical", "categorical", "numeric", "group"))
    path = write(tmp_path / "d.csv", ["Gender,Antiparkinsonian medication,Age,Group",
                                      "Female,No,50,PD", "Male,No,60,HC", "Male,,70,RBD"])
    enc = encode_categoricals(load_csv(path, schema))
    assert [r[0] for r in enc.rows] == [1.0, 0.0, 0.0]
    assert enc.rows[0][1] == 0.0 and enc.rows[1][1] == 0.0
    assert enc.rows[2][1] is MISSING
    assert [r[2] for r in enc.rows] == [50.0, 60.0, 70.0]


def test_encoding_is_idempotent(raw_table):
    once = encode_categoricals(raw_table)
    twice = encode_categoricals(once)
    assert once.rows == twice.rows and once.kinds == twice.kinds


def test_antiparkinsonian_column_all_zero(raw_table):
    enc = encode_categoricals(raw_table)
    assert set(enc.column("Antiparkinsonian medication")) == {0.0}


def test_unknown_category_names_column_row_value(tmp_path):
    schema = Schema(columns=("Gender", "Group"), kinds=("categorical", "group"))
    path = write(tmp_path / "d.csv", ["Gender,Group", "Male,PD", "Other,HC"])
    with pytest.raises(DatasetError, match=r"'Other'.*'Gender'.*row 1"):
        encode_categoricals(load_csv(path, schema))


# ---- derive_subsets -------------------------------------------------------

def test_subset_shapes(pdrbd, pdhc):
    assert (pdrbd.n_samples, pdrbd.n_features) == (80, 64)
    assert (pdhc.n_samples, pdhc.n_features) == (80, 24)
    assert pdrbd.class_counts() == {"PD": 30, "RBD": 50}
    assert pdhc.class_counts() == {"PD": 30, "HC": 50}


def test_pdhc_drops_exactly_the_hc_unavailable_columns(pdrbd, pdhc):
    dropped = set(pdrbd.feature_names) - set(pdhc.feature_names)
    assert dropped == set(HC_UNAVAILABLE)


def test_no_missing_column_keeps_everything():
    rows = tuple((float(i), float(i % 2)) for i in range(6))
    table = FeatureTable(("a", "b"), ("numeric", "numeric"), rows,
                         ("PD", "RBD", "HC", "PD", "RBD", "HC"), "Group", {})
    pdrbd, pdhc = derive_subsets(table)
    assert pdhc.feature_names == ("a", "b") == pdrbd.feature_names


def test_pdrbd_with_missing_cell_is_an_error():
    table = FeatureTable(("a",), ("numeric",), ((1.0,), (MISSING,), (2.0,)), ("PD", "RBD", "HC"), "Group", {})
    with pytest.raises(DatasetError, match="MISSING"):
        derive_subsets(table)


def test_subset_missing_a_class():
    table = FeatureTable(("a",), ("numeric",), ((1.0,), (2.0,)), ("PD", "RBD"), "Group", {})
    with pytest.raises(DatasetError, match="PDHC"):
        derive_subsets(table)


def test_pdhc_with_no_features_left():
    table = FeatureTable(("a",), ("numeric",), ((1.0,), (2.0,), (MISSING,)), ("PD", "RBD", "HC"), "Group", {})
    with pytest.raises(DatasetError, match="zero features"):
        derive_subsets(table)


@given(st.lists(st.sampled_from(["PD", "RBD", "HC"]), min_size=3, max_size=40))
def test_positive_count_equals_pd_rows(groups):
    groups = ["PD", "RBD", "HC"] + groups
    rows = tuple((float(i),) for i in range(len(groups)))
    pdrbd, pdhc = derive_subsets(FeatureTable(("a",), ("numeric",), rows, tuple(groups), "Group", {}))
    assert pdrbd.y.sum() == pdhc.y.sum() == groups.count("PD")


# ---- LabeledDataset -------------------------------------------------------

def test_labeled_dataset_validation():
    with pytest.raises(DatasetError):
        LabeledDataset(np.zeros((2, 1)), [0, 2], ("a",))
    with pytest.raises(DatasetError):
        LabeledDataset(np.zeros((2, 1)), [1, 1], ("a",))
    with pytest.raises(DatasetError):
        LabeledDataset(np.array([[np.nan], [0]]), [0, 1], ("a",))
    assert LabeledDataset(np.zeros((2, 1)), [1, 1], ("a",), degenerate=True).n_samples == 2


def test_labeled_dataset_is_read_only(pdrbd):
    with pytest.raises(ValueError):
        pdrbd.X[0, 0] = 1.0


# ---- stratified_split -----------------------------------------------------

def test_pdrbd_split_counts(pdrbd):
    split = stratified_split(pdrbd, 0.25, seed=42)
    assert split.test.class_counts() == {"PD": 8, "RBD": 12}
    assert split.train.class_counts() == {"PD": 22, "RBD": 38}


def test_largest_remainder_matches_oracle():
    for sizes, frac in [([30, 50], 0.25), ([2, 2], 0.5), ([7, 13], 0.3), ([5, 5], 0.1), ([1, 3], 0.5)]:
        assert allocate_largest_remainder(sizes, frac) == largest_remainder(sizes, frac)


def test_split_is_deterministic(pdhc):
    a = stratified_split(pdhc, 0.25, seed=3)
    b = stratified_split(pdhc, 0.25, seed=3)
    assert a.train.equals(b.train) and a.test.equals(b.test)


def test_half_split_of_four_rows():
    ds = LabeledDataset(np.arange(4.0)[:, None], [0, 1, 0, 1], ("a",))
    split = stratified_split(ds, 0.5, seed=0)
    assert split.train.n_samples == split.test.n_samples == 2
    assert split.test.y.sum() == 1 and split.train.y.sum() == 1


def test_split_rejects_empty_side():
    ds = LabeledDataset(np.arange(4.0)[:, None], [0, 1, 0, 1], ("a",))
    with pytest.raises(DatasetError):
        stratified_split(ds, 0.1, seed=0)
    with pytest.raises(DatasetError):
        stratified_split(ds, 1.0, seed=0)


@given(n_pos=st.integers(2, 60), n_neg=st.integers(2, 60),
       frac=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
def test_split_partition_and_stratification(n_pos, n_neg, frac, seed):
    y = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    ds = LabeledDataset(np.arange(len(y), dtype=float)[:, None], y, ("a",))
    counts = allocate_largest_remainder([n_pos, n_neg], frac)
    if 0 in counts or counts[0] == n_pos or counts[1] == n_neg:
        with pytest.raises(DatasetError):
            stratified_split(ds, frac, seed)
        return
    split = stratified_split(ds, frac, seed)
    train, test = set(split.train.row_ids.tolist()), set(split.test.row_ids.tolist())
    assert not train & test and train | test == set(range(len(y)))
    assert abs(split.test.y.sum() - frac * n_pos) < 1
    assert abs((1 - split.test.y).sum() - frac * n_neg) < 1
