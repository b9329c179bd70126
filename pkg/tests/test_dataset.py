import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feverscreen.dataset import (CohortSpec, Dataset, extract_features, generate_cohort,
                                 read_csv, read_split, split_dataset, split_manifest_path,
                                 split_sizes, write_csv, write_split)
from feverscreen.errors import (InsufficientDataError, ParseError, SchemaError, SpecError,
                                SplitError)


def small_spec(**kw):
    return CohortSpec(**{"n_positive": 25, "n_negative": 25, "seed": 3, **kw})


def sliding_oracle(readings, L):
    return [list(readings[i:i + L]) for i in range(len(readings) - L + 1)]


def test_default_cohort_counts(cohort):
    assert len(cohort) == 1386
    assert int(cohort.labels.sum()) == 693
    assert cohort.window_length == 11


@pytest.mark.parametrize("kw", [{"n_positive": 0}, {"n_negative": 0},
                                {"positive_temp_std": -1.0}, {"n_positive": 3, "n_negative": 3}])
def test_degenerate_spec(kw):
    with pytest.raises(SpecError):
        generate_cohort(small_spec(**kw))


@pytest.mark.parametrize("seed", range(10))
def test_positive_body_temps_meet_threshold(seed):
    spec = small_spec(seed=seed, n_positive=60, n_negative=60)
    data = generate_cohort(spec)
    pos = data.body_temps[data.labels == 1]
    neg = data.body_temps[data.labels == 0]
    assert pos.size == 60 and np.all(pos >= spec.fever_threshold)
    assert np.all(neg < spec.fever_threshold)
    lo, hi = spec.distance_range
    assert np.all((data.distances >= lo) & (data.distances <= hi))


def test_cohort_reproducible_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(generate_cohort(small_spec()), a)
    write_csv(generate_cohort(small_spec()), b)
    assert a.read_bytes() == b.read_bytes()
    write_csv(generate_cohort(small_spec(seed=4)), b)
    assert a.read_bytes() != b.read_bytes()


def test_extract_features_single_window():
    w = extract_features(np.arange(11.0), 9, 2)
    assert w.shape == (1, 11)


def test_extract_features_too_short():
    with pytest.raises(InsufficientDataError):
        extract_features(np.arange(10.0), 9, 2)


def test_extract_features_example():
    w = extract_features(list(range(1, 14)), 9, 2)
    assert w.tolist() == sliding_oracle(list(range(1, 14)), 11)
    assert w.shape == (3, 11)
    assert w[0].tolist() == list(range(1, 12))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=60), st.integers(1, 12),
       st.integers(0, 5))
def test_extract_features_matches_oracle(readings, d_in, d_out):
    L = d_in + d_out
    if len(readings) < L:
        with pytest.raises(InsufficientDataError):
            extract_features(readings, d_in, d_out)
        return
    w = extract_features(readings, d_in, d_out)
    assert len(w) == len(readings) - L + 1
    assert w.tolist() == sliding_oracle(readings, L)


def _toy(n, n_pos=None, seed=0):
    rng = np.random.default_rng(seed)
    n_pos = n // 2 if n_pos is None else n_pos
    labels = np.array([1] * n_pos + [0] * (n - n_pos))
    return Dataset(rng.normal(37, 1, size=(n, 11)), labels)


@pytest.mark.parametrize("n, sizes", [(693, (485, 103, 105)), (100, (70, 15, 15))])
def test_split_sizes_examples(n, sizes):
    assert split_sizes(n) == sizes
    assert split_dataset(_toy(n), 42).split.sizes() == sizes


def test_split_too_small():
    with pytest.raises(SplitError):
        split_dataset(_toy(19), 0)


def test_split_deterministic():
    a = split_dataset(_toy(200), 9).split
    b = split_dataset(_toy(200), 9).split
    assert a == b
    assert a != split_dataset(_toy(200), 10).split


@settings(max_examples=60, deadline=None)
@given(n=st.integers(20, 3000), frac=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
def test_split_floor_rule_and_partition(n, frac, seed):
    n_pos = min(n - 1, max(1, round(frac * n)))
    split = split_dataset(_toy(n, n_pos), seed).split
    tr, va, te = split.sizes()
    assert tr == math.floor(0.70 * n) and va == math.floor(0.15 * n)
    assert te == n - tr - va
    members = list(split.train) + list(split.val) + list(split.test)
    assert sorted(members) == list(range(n))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(100, 3000), frac=st.floats(0.1, 0.9), seed=st.integers(0, 2**31))
def test_split_is_stratified(n, frac, seed):
    n_pos = round(frac * n)
    data = split_dataset(_toy(n, n_pos), seed)
    overall = n_pos / n
    for name in ("train", "val", "test"):
        _, y = data.subset(name)
        assert abs(y.mean() - overall) <= 0.05


def test_csv_round_trip(tmp_path):
    data = generate_cohort(small_spec())
    path = tmp_path / "d.csv"
    write_csv(data, path)
    assert read_csv(path) == Dataset(data.features, data.labels)
    assert read_csv(path, window_length=11).window_length == 11


def test_csv_header_layout(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(generate_cohort(small_spec()), path)
    assert path.read_text().splitlines()[0] == "r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,r11,label"


def _write_rows(path, rows, head="r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,r11,label"):
    path.write_text("\n".join([head] + rows) + "\n")


def test_csv_bad_label_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    _write_rows(path, [",".join(["37.0"] * 11 + ["1"]), ",".join(["37.0"] * 11 + ["2"])])
    with pytest.raises(ParseError) as err:
        read_csv(path)
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_csv_bad_number(tmp_path):
    path = tmp_path / "bad.csv"
    _write_rows(path, [",".join(["37.0"] * 10 + ["warm", "0"])])
    with pytest.raises(ParseError):
        read_csv(path)


def test_csv_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    _write_rows(path, [], head="a,b,c")
    with pytest.raises(SchemaError):
        read_csv(path)
    _write_rows(path, [], head="r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,r11,label")
    with pytest.raises(SchemaError):
        read_csv(path, window_length=9)


def test_csv_wrong_column_count(tmp_path):
    path = tmp_path / "bad.csv"
    _write_rows(path, [",".join(["37.0"] * 10 + ["1"])])
    with pytest.raises(SchemaError):
        read_csv(path)


def test_split_manifest_round_trip(tmp_path, cohort):
    path = split_manifest_path(tmp_path / "cohort.csv")
    assert path.name == "cohort.split.json"
    write_split(cohort.split, path)
    raw = json.loads(path.read_text())
    assert set(raw) == {"train", "val", "test"}
    assert read_split(path, len(cohort)) == cohort.split
    with pytest.raises(SchemaError):
        read_split(path, len(cohort) + 1)
