import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from vropt.data import (
    TABLE3, SyntheticSpec, check_metadata, dump_libsvm, fetch_instructions, load_named,
    parse_libsvm, partition_clients, partition_indices, planted_model, read_libsvm,
    synthesize_dataset,
)
from vropt.errors import DatasetNotFound, EmptyDataset, InvalidArgument, ParseError
from vropt.model import BINARY, REGRESSION, Dataset


def test_parse_single_row():
    ds = parse_libsvm("+1 1:0.5 3:-2\n")
    assert ds.n == 1 and ds.d == 3
    assert ds.targets[0] == 1.0
    assert ds.row(0) == [(1, 0.5), (3, -2.0)]


def test_parse_binary_labels():
    ds = parse_libsvm("1 2:1\n-1 1:1\n")
    assert ds.n == 2 and ds.kind == BINARY


def test_parse_zero_one_labels_remapped():
    ds = parse_libsvm("0 1:1\n1 1:2\n")
    assert ds.kind == BINARY
    assert list(ds.targets) == [-1.0, 1.0]


def test_parse_regression_labels():
    ds = parse_libsvm("15 1:0.4\n7 2:1\n")
    assert ds.kind == REGRESSION
    assert list(ds.targets) == [15.0, 7.0]


def test_forced_binary_two_valued_labels():
    ds = parse_libsvm("1 1:1\n2 1:0\n2 2:1\n", kind=BINARY)
    assert list(ds.targets) == [-1.0, 1.0, 1.0]


def test_parse_comments_blank_lines_and_bytes():
    ds = parse_libsvm(b"# header\n\n1 1:2 # trailing\n-1 2:3\n")
    assert ds.n == 2 and ds.row(0) == [(1, 2.0)]


def test_parse_explicit_dimension():
    assert parse_libsvm("1 2:1\n", d=5).d == 5
    with pytest.raises(InvalidArgument):
        parse_libsvm("1 7:1\n", d=5)


@pytest.mark.parametrize("text, line", [
    ("1 1:0.5\n1 abc\n", 2),
    ("1 0:1\n", 1),
    ("1 1:x\n", 1),
    ("1 2:1 1:1\n", 1),
    ("1 1:1\nfoo 1:1\n", 2),
    ("1 1:nan\n", 1),
])
def test_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as exc:
        parse_libsvm(text)
    assert exc.value.line == line


def test_parse_empty():
    with pytest.raises(EmptyDataset):
        parse_libsvm("# nothing\n\n")


def test_read_missing_file(tmp_path):
    with pytest.raises(DatasetNotFound):
        read_libsvm(tmp_path / "nope")


def test_abalone_shaped_file(tmp_path):
    rng = np.random.default_rng(0)
    lines = []
    for i in range(4177):
        feats = " ".join(f"{j}:{rng.uniform():.4f}" for j in range(1, 9))
        lines.append(f"{rng.integers(1, 30)} {feats}")
    path = tmp_path / "abalone"
    path.write_text("\n".join(lines) + "\n")
    ds = load_named("abalone", tmp_path)
    assert (ds.n, ds.d) == (4177, 8)
    assert check_metadata(ds, "abalone")


def test_load_named_pads_missing_trailing_features(tmp_path):
    (tmp_path / "pyrim").write_text("".join(f"0.{i} 1:1\n" for i in range(74)))
    ds = load_named("pyrim", tmp_path)
    assert (ds.n, ds.d) == (74, 27)


def test_load_named_env_var(tmp_path, monkeypatch):
    (tmp_path / "mg.txt").write_text("1.5 1:1\n")
    monkeypatch.setenv("VROPT_DATA_DIR", str(tmp_path))
    ds = load_named("mg")
    assert ds.name == "mg" and ds.d == 6


def test_load_named_missing(tmp_path):
    with pytest.raises(DatasetNotFound):
        load_named("w8a", tmp_path)


def test_metadata_mismatch_warns(caplog):
    ds = parse_libsvm("1 1:1\n")
    assert not check_metadata(ds, "w8a")
    assert "registry" in caplog.text


@pytest.mark.parametrize("name, shape", [("w8a", (49749, 300)), ("pyrim", (74, 27)), ("abalone", (4177, 8))])
def test_registry(name, shape):
    assert (TABLE3[name].n, TABLE3[name].d) == shape


def test_fetch_instructions():
    text = fetch_instructions("a9a")
    assert "binary/a9a" in text and "n=32561" in text
    assert "regression/mg" in fetch_instructions("mg")
    with pytest.raises(InvalidArgument):
        fetch_instructions("imagenet")


# ---- synthetic -------------------------------------------------------------------

def test_synthetic_deterministic():
    spec = SyntheticSpec(4, 2, seed=7)
    assert synthesize_dataset(spec) == synthesize_dataset(spec)


def test_synthetic_classification_labels():
    ds = synthesize_dataset(SyntheticSpec(100, 5, "classification"))
    assert set(np.unique(ds.targets)) <= {-1.0, 1.0}
    assert ds.kind == BINARY


def test_synthetic_planted_residuals_zero():
    spec = SyntheticSpec(50, 4, REGRESSION, 0.0, 3)
    ds = synthesize_dataset(spec)
    assert np.array_equal(ds.features @ planted_model(spec), ds.targets)


def test_synthetic_shape():
    ds = synthesize_dataset(SyntheticSpec(10, 3))
    assert (ds.n, ds.d) == (10, 3)


@pytest.mark.parametrize("kwargs", [dict(n=0, d=1), dict(n=1, d=0), dict(n=1, d=1, kind="x"),
                                    dict(n=1, d=1, noise_scale=-1.0), dict(n=1, d=1, seed=-1)])
def test_synthetic_spec_validation(kwargs):
    with pytest.raises(InvalidArgument):
        SyntheticSpec(**kwargs)


# ---- partition -------------------------------------------------------------------

def test_partition_abalone():
    parts = partition_indices(4177, 10)
    assert [len(p) for p in parts] == [417] * 10
    used = np.concatenate(parts)
    assert used[-1] == 4169  # 0-based; rows 4170..4176 ignored
    assert 4177 - used.size == 7


def test_partition_even():
    assert [list(p) for p in partition_indices(6, 3)] == [[0, 1], [2, 3], [4, 5]]


def test_partition_remainder():
    parts = partition_indices(7, 3)
    assert [len(p) for p in parts] == [2, 2, 2]
    assert 6 not in np.concatenate(parts)


def test_partition_invalid():
    with pytest.raises(InvalidArgument):
        partition_indices(3, 4)
    with pytest.raises(InvalidArgument):
        partition_indices(3, 0)


@settings(max_examples=60, deadline=None)
@given(total=st.integers(1, 300), data=st.data())
def test_partition_properties(total, data):
    k = data.draw(st.integers(1, total))
    ds = synthesize_dataset(SyntheticSpec(total, 2, seed=total))
    parts = partition_clients(ds, k)
    sizes = {p.n for p in parts}
    assert len(sizes) == 1
    m = total // k
    assert sum(p.n for p in parts) == k * m
    stacked = sparse.vstack([p.features for p in parts]).toarray()
    np.testing.assert_array_equal(stacked, ds.features[: k * m].toarray())
    np.testing.assert_array_equal(np.concatenate([p.targets for p in parts]), ds.targets[: k * m])


# ---- round trip ------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False, width=64).filter(lambda v: v != 0.0)


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 6))
    d = draw(st.integers(1, 6))
    binary = draw(st.booleans())
    dense = np.zeros((n, d))
    for i in range(n):
        for j in range(d):
            if draw(st.booleans()):
                dense[i, j] = draw(finite)
    if binary:
        y = np.array([draw(st.sampled_from([-1.0, 1.0])) for _ in range(n)])
        return Dataset(sparse.csr_matrix(dense), y, BINARY)
    y = np.array([draw(st.floats(-1e6, 1e6).filter(lambda v: v not in (-1.0, 0.0, 1.0))) for _ in range(n)])
    return Dataset(sparse.csr_matrix(dense), y, REGRESSION)


@settings(max_examples=100, deadline=None)
@given(ds=datasets())
def test_roundtrip(ds):
    text = dump_libsvm(ds)
    back = parse_libsvm(text, d=ds.d)
    assert back == ds
    assert dump_libsvm(back) == text


@settings(max_examples=50, deadline=None)
@given(ds=datasets())
def test_parse_preserves_row_order(ds):
    back = parse_libsvm(dump_libsvm(ds), d=ds.d)
    for i in range(ds.n):
        assert back.row(i) == ds.row(i)
