"""
GRANULA - Sweep Cell Records

Every sweep cell (dataset, C, m0, fold, repeat, method) produces exactly one
CellResult, successful or failed. Failed cells carry the error text and are
excluded from aggregates.

Schema (one NDJSON line per record):
{
  "dataset_id": "<id>", "config_id": "<hex>", "c": 3, "m0": 2.1, "m_index": 2,
  "fold": 0, "repeat": 0,
  "method": "baseline | proposed",
  "status": "success | failed",
  "train_error": 0.0123, "test_error": 0.0345,
  "n_train": 171, "n_test": 43,
  "m_star": [..] | null,
  "error": "",
  "elapsed": 0.0
}
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from core.errors import ParameterError

VALID_METHODS = ("baseline", "proposed")
VALID_STATUSES = ("success", "failed")

CellKey = Tuple[str, str, int, int, float, int, int, str]


@dataclass
class CellResult:
    dataset_id: str
    c: int
    m0: float
    m_index: int
    fold: int
    repeat: int
    method: str
    status: str = "success"
    train_error: float = 0.0
    test_error: float = 0.0
    n_train: int = 0
    n_test: int = 0
    m_star: Optional[List[float]] = field(default=None)
    error: str = ""
    elapsed: float = 0.0
    config_id: str = ""

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if self.method not in VALID_METHODS:
            raise ParameterError(f"CellResult.method must be one of {VALID_METHODS}, got '{self.method}'")
        if self.status not in VALID_STATUSES:
            raise ParameterError(f"CellResult.status must be one of {VALID_STATUSES}, got '{self.status}'")
        if self.status == "success":
            for name in ("train_error", "test_error"):
                value = getattr(self, name)
                if not (math.isfinite(value) and value >= 0):
                    raise ParameterError(f"CellResult.{name} must be finite and >= 0, got {value}")

    @property
    def key(self) -> CellKey:
        return (
            self.dataset_id, self.config_id, self.c, self.m_index, float(self.m0),
            self.fold, self.repeat, self.method,
        )

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "config_id": self.config_id,
            "c": int(self.c),
            "m0": float(self.m0),
            "m_index": int(self.m_index),
            "fold": int(self.fold),
            "repeat": int(self.repeat),
            "method": self.method,
            "status": self.status,
            "train_error": float(self.train_error),
            "test_error": float(self.test_error),
            "n_train": int(self.n_train),
            "n_test": int(self.n_test),
            "m_star": None if self.m_star is None else [float(v) for v in self.m_star],
            "error": self.error,
            "elapsed": float(self.elapsed),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CellResult":
        return cls(
            dataset_id=str(data["dataset_id"]),
            c=int(data["c"]),
            m0=float(data["m0"]),
            m_index=int(data.get("m_index", 0)),
            fold=int(data["fold"]),
            repeat=int(data["repeat"]),
            method=data["method"],
            status=data.get("status", "success"),
            train_error=float(data.get("train_error", 0.0)),
            test_error=float(data.get("test_error", 0.0)),
            n_train=int(data.get("n_train", 0)),
            n_test=int(data.get("n_test", 0)),
            m_star=data.get("m_star"),
            error=data.get("error", ""),
            elapsed=float(data.get("elapsed", 0.0)),
            config_id=str(data.get("config_id", "")),
        )

    @classmethod
    def failure(cls, error: str, **keys: Any) -> "CellResult":
        """Convenience constructor for a failed cell."""
        return cls(status="failed", error=error, train_error=0.0, test_error=0.0, **keys)

    def __repr__(self):
        return (
            f"CellResult({self.dataset_id} C={self.c} m0={self.m0} fold={self.fold} "
            f"rep={self.repeat} {self.method} {self.status} train={self.train_error:.6g} test={self.test_error:.6g})"
        )


def record_key(record: Dict[str, Any]) -> CellKey:
    """Identity of a raw NDJSON record, for log de-duplication."""
    return (
        str(record["dataset_id"]), str(record.get("config_id", "")), int(record["c"]),
        int(record.get("m_index", 0)), float(record["m0"]),
        int(record["fold"]), int(record["repeat"]), str(record["method"]),
    )
