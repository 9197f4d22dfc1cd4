"""LIBSVM parsing, synthetic datasets, metadata checks and client partitioning."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DatasetNotFound, EmptyDataset, InvalidArgument, ParseError
from .model import BINARY, REGRESSION, Dataset, Objective

log = logging.getLogger(__name__)

DATA_DIR_ENV = "VROPT_DATA_DIR"
LIBSVM_BASE_URL = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets"


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    n: int
    d: int
    kind: str = REGRESSION


# sample/feature counts of the supported LIBSVM benchmark files
TABLE3 = {
    "a9a": DatasetMeta("a9a", 32561, 123, BINARY),
    "abalone": DatasetMeta("abalone", 4177, 8, REGRESSION),
    "mg": DatasetMeta("mg", 1385, 6, REGRESSION),
    "mushrooms": DatasetMeta("mushrooms", 8124, 112, BINARY),
    "phishing": DatasetMeta("phishing", 11055, 68, BINARY),
    "pyrim": DatasetMeta("pyrim", 74, 27, REGRESSION),
    "triazines": DatasetMeta("triazines", 186, 60, REGRESSION),
    "w8a": DatasetMeta("w8a", 49749, 300, BINARY),
}


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    kind: str = REGRESSION
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidArgument("synthetic spec needs n >= 1 and d >= 1")
        if self.kind not in (REGRESSION, "classification", BINARY):
            raise InvalidArgument(f"unknown synthetic kind {self.kind!r}")
        if self.noise_scale < 0:
            raise InvalidArgument("noise_scale must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must fit in 64 unsigned bits")


def _parse_float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"malformed number {tok!r}", lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", lineno)
    return v


def parse_libsvm(text, d: int | None = None, kind: str | None = None, name: str | None = None) -> Dataset:
    """Parse ``label idx:val idx:val ...`` lines into a Dataset.

    ``d`` overrides the feature count (otherwise the largest index seen).
    Labels drawn from {-1, 0, 1} mark a binary dataset, with 0 mapped to -1;
    anything else is read as regression targets. Passing ``kind=BINARY``
    forces a two-valued label set onto {-1, +1} (smaller value -> -1).
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    labels: list[float] = []
    indptr = [0]
    cols: list[int] = []
    vals: list[float] = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_float(tokens[0], lineno))
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"malformed index {idx_s!r}", lineno) from None
            if idx <= 0:
                raise ParseError(f"index must be positive, got {idx}", lineno)
            if idx <= prev:
                raise ParseError(f"indices must be strictly increasing ({idx} after {prev})", lineno)
            prev = idx
            cols.append(idx - 1)
            vals.append(_parse_float(val_s, lineno))
        max_index = max(max_index, prev)
        indptr.append(len(cols))
    if not labels:
        raise EmptyDataset("no data rows found")
    if d is None:
        d = max_index
    elif d < max_index:
        raise InvalidArgument(f"feature index {max_index} exceeds requested d={d}")

    y = np.asarray(labels, dtype=np.float64)
    uniq = np.unique(y)
    if kind is None:
        kind = BINARY if set(uniq) <= {-1.0, 0.0, 1.0} else REGRESSION
        if kind == BINARY:
            y = np.where(y == 0.0, -1.0, y)
    elif kind == BINARY and not set(uniq) <= {-1.0, 1.0}:
        if len(uniq) > 2:
            raise InvalidArgument(f"binary dataset has {len(uniq)} distinct labels")
        y = np.where(y == uniq[0], -1.0, 1.0)

    X = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.float64), np.asarray(cols, dtype=np.int32), np.asarray(indptr)),
        shape=(len(labels), d),
    )
    return Dataset(X, y, kind, name)


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_libsvm(ds: Dataset) -> str:
    """Canonical text form; ``parse_libsvm(dump_libsvm(ds), d=ds.d) == ds``."""
    out = []
    for i in range(ds.n):
        label = ds.targets[i]
        head = ("+1" if label > 0 else "-1") if ds.kind == BINARY else _fmt(label)
        out.append(" ".join([head] + [f"{j}:{_fmt(v)}" for j, v in ds.row(i)]))
    return "\n".join(out) + "\n"


def read_libsvm(path, d: int | None = None, kind: str | None = None) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFound(str(path))
    return parse_libsvm(path.read_bytes(), d=d, kind=kind, name=path.stem)


def planted_model(spec: SyntheticSpec) -> np.ndarray:
    """The x* a synthetic dataset was generated from."""
    return _synthesize(spec)[1]


def _synthesize(spec: SyntheticSpec):
    rng = np.random.default_rng(spec.seed)
    A = rng.uniform(-1.0, 1.0, size=(spec.n, spec.d))
    x_star = rng.standard_normal(spec.d)
    noise = rng.standard_normal(spec.n)
    X = sparse.csr_matrix(A)
    signal = X @ x_star
    if spec.noise_scale:
        signal = signal + spec.noise_scale * noise
    if spec.kind == REGRESSION:
        return Dataset(X, signal, REGRESSION, "synthetic"), x_star
    y = np.where(signal >= 0, 1.0, -1.0)
    return Dataset(X, y, BINARY, "synthetic"), x_star


def synthesize_dataset(spec: SyntheticSpec) -> Dataset:
    """Seeded dataset: features iid U[-1, 1], planted x* ~ N(0, I).

    Regression targets are a_i^T x* + noise_scale * N(0, 1); classification
    labels are the sign of the same quantity (ties go to +1).
    """
    return _synthesize(spec)[0]


def partition_indices(total: int, n_clients: int) -> list[np.ndarray]:
    """Contiguous blocks of floor(total / n_clients); the remainder is dropped."""
    if n_clients < 1 or n_clients > total:
        raise InvalidArgument(f"cannot split {total} points across {n_clients} clients")
    m = total // n_clients
    return [np.arange(k * m, (k + 1) * m) for k in range(n_clients)]


def partition_clients(ds: Dataset, n_clients: int) -> list[Dataset]:
    return [ds.subset(idx) for idx in partition_indices(ds.n, n_clients)]


def partition_objective(obj: Objective, n_clients: int) -> list[Objective]:
    return [obj.restrict(idx) for idx in partition_indices(obj.n, n_clients)]


def dataset_metadata(ds: Dataset) -> DatasetMeta:
    return DatasetMeta(ds.name or "", ds.n, ds.d, ds.kind)


def check_metadata(ds: Dataset, name: str) -> bool:
    """Compare against the bundled registry; log a warning on mismatch."""
    ref = TABLE3.get(name)
    if ref is None:
        return True
    ok = (ds.n, ds.d) == (ref.n, ref.d)
    if not ok:
        log.warning("dataset %s has (n, d) = (%d, %d); registry says (%d, %d)", name, ds.n, ds.d, ref.n, ref.d)
    return ok


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def load_named(name: str, directory=None) -> Dataset:
    directory = Path(directory) if directory is not None else data_dir()
    ref = TABLE3.get(name)
    for candidate in (name, f"{name}.txt", f"{name}.libsvm", f"{name}_scale"):
        path = directory / candidate
        if path.is_file():
            ds = read_libsvm(path, kind=ref.kind if ref else None)
            if ref is not None and ds.d < ref.d:
                # trailing all-zero features never show up in the file
                ds = Dataset(sparse.csr_matrix(ds.features, shape=(ds.n, ref.d)), ds.targets, ds.kind)
            ds.name = name
            check_metadata(ds, name)
            return ds
    raise DatasetNotFound(f"{name} not found in {directory} (set {DATA_DIR_ENV})")


def fetch_instructions(name: str) -> str:
    ref = TABLE3.get(name)
    if ref is None:
        raise InvalidArgument(f"unknown dataset {name!r}; known: {', '.join(sorted(TABLE3))}")
    group = "binary" if ref.kind == BINARY else "regression"
    return (
        f"curl -o \"${{{DATA_DIR_ENV}:-data}}/{name}\" {LIBSVM_BASE_URL}/{group}/{name}\n"
        f"# expected: n={ref.n}, d={ref.d}"
    )
