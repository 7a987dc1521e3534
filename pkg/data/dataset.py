"""
GRANULA - Dataset Ingestion

  - CSV loading with optional header, leading id column and trailing label column.
  - Z-score normalization (sample standard deviation, divisor N-1).
  - Seeded k-fold plans with balanced fold sizes.
  - The nine-blob synthetic benchmark.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import (
    CsvParseError,
    CsvStructureError,
    DegenerateFeatureError,
    DimensionError,
    EmptyInputError,
    ParameterError,
)
from core.seeding import get_rng

logger = logging.getLogger("granula.data.dataset")


@dataclass
class Dataset:
    """N x n matrix of finite feature values."""
    rows: np.ndarray
    feature_names: Optional[List[str]] = None
    source_id: str = ""

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        self._validate()

    def _validate(self):
        if self.rows.ndim != 2:
            raise DimensionError(f"Dataset rows must be a 2-D matrix, got shape {self.rows.shape}")
        n_rows, n_cols = self.rows.shape
        if n_rows < 2 or n_cols < 1:
            raise DimensionError(f"Dataset needs N >= 2 rows and n >= 1 columns, got {n_rows}x{n_cols}")
        if not np.all(np.isfinite(self.rows)):
            raise ParameterError("Dataset contains NaN or infinite values")
        if self.feature_names is not None and len(self.feature_names) != n_cols:
            raise DimensionError(
                f"{len(self.feature_names)} feature names for {n_cols} columns"
            )

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.rows[indices], self.feature_names, self.source_id)

    def column_label(self, k: int) -> Any:
        return self.feature_names[k] if self.feature_names else k

    def to_csv_text(self, header: bool = True) -> str:
        lines = []
        if header and self.feature_names:
            lines.append(",".join(self.feature_names))
        for row in self.rows:
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass
class NormalizationParams:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        if np.any(self.stds <= 0):
            raise ParameterError("NormalizationParams.stds must be strictly positive")

    def to_dict(self) -> Dict[str, Any]:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormalizationParams":
        return cls(means=data["means"], stds=data["stds"])


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=int)
        if self.k < 2:
            raise ParameterError(f"FoldPlan.k must be >= 2, got {self.k}")
        if self.assignments.size and (self.assignments.min() < 0 or self.assignments.max() >= self.k):
            raise ParameterError(f"Fold assignments must lie in [0, {self.k})")

    def fold_sizes(self) -> List[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_test(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """Held-out fold as test set, the rest as training set."""
        mask = self.assignments == fold
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def to_dict(self) -> Dict[str, Any]:
        return {"k": int(self.k), "assignments": self.assignments.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FoldPlan":
        return cls(k=int(data["k"]), assignments=data["assignments"])


def _default_centers() -> List[List[float]]:
    # 3x3 grid
    return [[x, y] for y in (-3.0, 0.0, 3.0) for x in (-3.0, 0.0, 3.0)]


@dataclass
class SyntheticSpec:
    blob_count: int = 9
    points_per_blob: int = 50
    blob_centers: List[List[float]] = field(default_factory=_default_centers)
    blob_stds: List[float] = field(default_factory=lambda: [0.5] * 9)
    seed: int = 0

    def __post_init__(self):
        if self.blob_count < 1 or self.points_per_blob < 1:
            raise ParameterError("blob_count and points_per_blob must be positive")
        if len(self.blob_centers) != self.blob_count:
            raise ParameterError(
                f"{len(self.blob_centers)} blob centers given for blob_count={self.blob_count}"
            )
        if len(self.blob_stds) != self.blob_count:
            raise ParameterError(
                f"{len(self.blob_stds)} blob stds given for blob_count={self.blob_count}"
            )
        if any(s < 0 for s in self.blob_stds):
            raise ParameterError("blob_stds must be non-negative")
        dims = {len(c) for c in self.blob_centers}
        if len(dims) != 1:
            raise ParameterError("All blob centers must share one dimensionality")

    @property
    def total_points(self) -> int:
        return self.blob_count * self.points_per_blob

    def to_dict(self) -> Dict[str, Any]:
        return {
            "blob_count": self.blob_count,
            "points_per_blob": self.points_per_blob,
            "blob_centers": [list(map(float, c)) for c in self.blob_centers],
            "blob_stds": [float(s) for s in self.blob_stds],
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticSpec":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _parse_cell(cell: str, row: int, column: int, path: str) -> float:
    text = cell.strip()
    try:
        return float(text)
    except ValueError:
        raise CsvParseError(row, column, text, path)


def load_csv(
    path: str,
    has_header: bool = False,
    drop_last_column: bool = False,
    drop_first_columns: int = 0,
    source_id: Optional[str] = None,
) -> Dataset:
    """Read a comma-separated numeric file. Rows and columns in errors are 1-based file positions."""
    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        raw = [(line_no, row) for line_no, row in enumerate(csv.reader(f), start=1)]

    raw = [(line_no, row) for line_no, row in raw if any(cell.strip() for cell in row)]
    if not raw:
        raise EmptyInputError(f"{path}: no rows")

    names: Optional[List[str]] = None
    if has_header:
        names = [cell.strip() for cell in raw[0][1]]
        raw = raw[1:]
        if not raw:
            raise EmptyInputError(f"{path}: header only, no data rows")

    width = len(raw[0][1])
    values: List[List[float]] = []
    for line_no, row in raw:
        if len(row) != width:
            raise CsvStructureError(
                f"{path}: row {line_no} has {len(row)} cells, expected {width}"
            )
        start = drop_first_columns
        stop = len(row) - 1 if drop_last_column else len(row)
        values.append([
            _parse_cell(row[col], line_no, col + 1, path) for col in range(start, stop)
        ])

    if names is not None:
        if len(names) != width:
            raise CsvStructureError(f"{path}: header has {len(names)} cells, rows have {width}")
        names = names[drop_first_columns:(len(names) - 1 if drop_last_column else len(names))]

    rows = np.asarray(values, dtype=float)
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise CsvStructureError(f"{path}: no numeric columns left after dropping label/id columns")
    logger.info(f"Loaded {path}: {rows.shape[0]} rows x {rows.shape[1]} features")
    return Dataset(rows, names, source_id or path)


def normalize_zscore(d: Dataset) -> Tuple[Dataset, NormalizationParams]:
    means = d.rows.mean(axis=0)
    stds = d.rows.std(axis=0, ddof=1)
    for k, s in enumerate(stds):
        if not s > 0:
            raise DegenerateFeatureError(d.column_label(k))
    params = NormalizationParams(means, stds)
    return Dataset((d.rows - means) / stds, d.feature_names, d.source_id), params


def denormalize(rows: np.ndarray, params: NormalizationParams) -> np.ndarray:
    return np.asarray(rows, dtype=float) * params.stds + params.means


def apply_zscore(d: Dataset, params: NormalizationParams) -> Dataset:
    """Normalize new data with statistics fitted elsewhere (e.g. the training file)."""
    check_same_width(d.rows, params.means.size, "normalization params")
    return Dataset((d.rows - params.means) / params.stds, d.feature_names, d.source_id)


def kfold_split(n_rows: int, k: int, seed: int) -> FoldPlan:
    if k < 2 or k > n_rows:
        raise ParameterError(f"k-fold needs 2 <= k <= n_rows, got k={k}, n_rows={n_rows}")
    order = get_rng(seed).permutation(n_rows)
    assignments = np.empty(n_rows, dtype=int)
    assignments[order] = np.arange(n_rows) % k
    return FoldPlan(k, assignments)


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = get_rng(spec.seed)
    dim = len(spec.blob_centers[0])
    blocks = []
    for center, std in zip(spec.blob_centers, spec.blob_stds):
        noise = rng.standard_normal((spec.points_per_blob, dim))
        blocks.append(np.asarray(center, dtype=float) + std * noise)
    names = [f"x{k + 1}" for k in range(dim)]
    return Dataset(np.vstack(blocks), names, "synthetic")


def blob_labels(spec: SyntheticSpec) -> np.ndarray:
    """Generating blob index for every row of gen_synthetic(spec)."""
    return np.repeat(np.arange(spec.blob_count), spec.points_per_blob)


def as_matrix(X: Any) -> np.ndarray:
    """Dataset or array-like -> 2-D float matrix (a single row is allowed)."""
    rows = X.rows if isinstance(X, Dataset) else np.asarray(X, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {rows.shape}")
    return rows


def check_same_width(rows: np.ndarray, width: int, what: str = "data") -> None:
    if rows.shape[1] != width:
        raise DimensionError(f"{what} has {rows.shape[1]} features, expected {width}")

