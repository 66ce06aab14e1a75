"""Dataset loading, standardization, splitting, synthetic benchmark
generation, and run-artifact persistence.

CSV convention: one header row, numeric cells, last column is the target.
Five synthetic benchmarks can be generated on demand; frozen copies of the
exact files used by the test suite ship with the package under
``nsgp/data`` so nothing depends on regeneration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np


class DatasetError(ValueError):
    """Raised for unreadable, non-numeric, or degenerate dataset files."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # N x D
    y: np.ndarray  # N
    name: str

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise DatasetError(f"inconsistent shapes X{self.X.shape} y{self.y.shape}")
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise DatasetError("dataset must have at least one row and one feature")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise DatasetError(f"dataset {self.name!r} contains non-finite values")
        if not self.y.var() > 0:
            raise DatasetError(f"dataset {self.name!r} has a constant target")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


class SplitIndices(NamedTuple):
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class StandardizeParams:
    mean: np.ndarray  # per-feature train mean
    scale: np.ndarray  # per-feature divisor actually applied (1 where sd was 0)


def load_csv(path: str | Path, name: str | None = None) -> Dataset:
    """Load a headered numeric CSV; the last column is the target."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DatasetError(f"{path}: need at least one feature column plus target")
        rows: list[list[float]] = []
        for r, row in enumerate(reader, start=2):  # header is line 1
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}: non-numeric cell at row {r}, column {c}: {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    return Dataset(X=data[:, :-1], y=data[:, -1], name=name or path.stem)


def export_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back out; values round-trip through load_csv exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"x{i}" for i in range(dataset.n_features)] + ["y"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for xi, yi in zip(dataset.X, dataset.y):
            writer.writerow([f"{v:.17g}" for v in xi] + [f"{yi:.17g}"])


def split(N: int, seed: int) -> SplitIndices:
    """Seeded random 80/10/10 partition of row indices 0..N-1."""
    if N < 10:
        raise DatasetError(f"need at least 10 rows to split, got {N}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(N)
    n_train = int(0.8 * N)
    n_val = int(0.1 * N)
    return SplitIndices(
        train=perm[:n_train],
        val=perm[n_train : n_train + n_val],
        test=perm[n_train + n_val :],
    )


def standardize(dataset: Dataset, train_indices: np.ndarray) -> tuple[Dataset, StandardizeParams]:
    """Shift/scale every feature by its training-split mean and sd.

    Zero-variance columns are only shifted. The target is left alone;
    error comparability across datasets is handled by variance-normalized
    MSE instead.
    """
    train_indices = np.asarray(train_indices)
    if train_indices.size == 0:
        raise DatasetError("train indices must be nonempty")
    mu = dataset.X[train_indices].mean(axis=0)
    sd = dataset.X[train_indices].std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    X = (dataset.X - mu) / scale
    return (
        Dataset(X=X, y=dataset.y, name=dataset.name),
        StandardizeParams(mean=mu, scale=scale),
    )


def apply_split(dataset: Dataset, idx: SplitIndices):
    """(X_train, y_train, X_val, y_val, X_test, y_test) views of a dataset."""
    return (
        dataset.X[idx.train], dataset.y[idx.train],
        dataset.X[idx.val], dataset.y[idx.val],
        dataset.X[idx.test], dataset.y[idx.test],
    )


# --- synthetic benchmarks ---------------------------------------------------

def _nguyen7(rng: np.random.Generator) -> Dataset:
    x = rng.uniform(0.0, 1.0, 20)
    y = np.log(x + 1.0) + np.log(x * x + 1.0)
    return Dataset(X=x[:, None], y=y, name="nguyen7")


def _keijzer6(rng: np.random.Generator) -> Dataset:
    x = np.arange(1, 122, dtype=np.float64)
    y = np.cumsum(1.0 / x)  # harmonic numbers H_1 .. H_121
    return Dataset(X=x[:, None], y=y, name="keijzer6")


def _pagie1(rng: np.random.Generator) -> Dataset:
    g = -5.0 + 0.4 * np.arange(25)  # 25 x 25 grid; never hits zero
    a, b = np.meshgrid(g, g, indexing="ij")
    a = a.ravel()
    b = b.ravel()
    y = 1.0 / (1.0 + a ** -4) + 1.0 / (1.0 + b ** -4)
    return Dataset(X=np.column_stack([a, b]), y=y, name="pagie1")


def _vladislavleva4(rng: np.random.Generator) -> Dataset:
    X = rng.uniform(0.05, 6.05, (5000, 5))
    y = 10.0 / (5.0 + ((X - 3.0) ** 2).sum(axis=1))
    return Dataset(X=X, y=y, name="vladislavleva4")


def _korns12(rng: np.random.Generator) -> Dataset:
    X = rng.uniform(-50.0, 50.0, (10000, 5))
    y = 2.0 - 2.1 * np.cos(9.8 * X[:, 0]) * np.sin(1.3 * X[:, 4])
    return Dataset(X=X, y=y, name="korns12")


SYNTHETIC_NAMES = ("nguyen7", "keijzer6", "pagie1", "vladislavleva4", "korns12")

_GENERATORS = {
    "nguyen7": _nguyen7,
    "keijzer6": _keijzer6,
    "pagie1": _pagie1,
    "vladislavleva4": _vladislavleva4,
    "korns12": _korns12,
}


def generate_synthetic(name: str, rng: np.random.Generator | int | None = None) -> Dataset:
    """Generate one of the five synthetic benchmarks, noiselessly."""
    if name not in _GENERATORS:
        raise DatasetError(f"unknown synthetic dataset {name!r}; know {SYNTHETIC_NAMES}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return _GENERATORS[name](rng)


def bundled_path(filename: str) -> Path:
    """Path of a data file shipped inside the package."""
    with resources.as_file(resources.files("nsgp").joinpath("data", filename)) as p:
        return Path(p)


def load_bundled(name: str) -> Dataset:
    """Load one of the frozen benchmark CSVs shipped with the package."""
    if name not in SYNTHETIC_NAMES:
        raise DatasetError(f"no bundled dataset {name!r}; know {SYNTHETIC_NAMES}")
    return load_csv(bundled_path(f"{name}.csv"), name=name)


# --- run artifacts -----------------------------------------------------------

def run_dir(root: str | Path, dataset: str, mode: str, seed: int) -> Path:
    return Path(root) / dataset / mode / str(seed)


def write_trace_csv(trace, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_err", "median_err", "front_size"])
        for row in trace:
            writer.writerow(
                [row.generation, f"{row.best_err:.17g}", f"{row.median_err:.17g}", row.front_size]
            )


def write_config_json(config: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


def read_config_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
