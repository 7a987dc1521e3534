"""
GRANULA - Report Aggregation

Per (dataset, method, C): pick the m0 with the lowest mean training error,
report its train/test mean and std over folds and repeats, the fold-size
weighted total, and the grand mean of totals over C.

Stds are population stds (ddof=0), so duplicating the result list leaves
every statistic unchanged.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import ReportError
from core.storage import atomic_write_text, dump_json
from experiment.cell_result import CellResult

logger = logging.getLogger("granula.experiment.report")

FORMATS = ("csv", "json", "markdown")
METHOD_TITLES = {"baseline": "FCM", "proposed": "Proposed method"}
CSV_COLUMNS = [
    "dataset_id", "method", "c", "m0", "train_mean", "train_std",
    "test_mean", "test_std", "total", "cells", "m_star",
]


def total_error(train: float, test: float, n_train: int, n_test: int) -> float:
    """Fold-size weighted combination of train and test errors."""
    return (n_train * train + n_test * test) / (n_train + n_test)


@dataclass
class ReportRow:
    dataset_id: str
    method: str
    c: int
    m0: float
    train_mean: float
    train_std: float
    test_mean: float
    test_std: float
    total: float
    cells: int
    m_star: Optional[List[float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset_id": self.dataset_id, "method": self.method, "c": self.c, "m0": self.m0,
            "train_mean": self.train_mean, "train_std": self.train_std,
            "test_mean": self.test_mean, "test_std": self.test_std,
            "total": self.total, "cells": self.cells, "m_star": self.m_star,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReportRow":
        return cls(**{k: data.get(k) for k in cls.__dataclass_fields__})


@dataclass
class ReportTable:
    rows: List[ReportRow] = field(default_factory=list)
    grand_means: Dict[str, Dict[str, float]] = field(default_factory=dict)   # dataset -> method -> mean
    failed_cells: int = 0

    def datasets(self) -> List[str]:
        return sorted({r.dataset_id for r in self.rows})

    def row(self, dataset_id: str, method: str, c: int) -> Optional[ReportRow]:
        for r in self.rows:
            if (r.dataset_id, r.method, r.c) == (dataset_id, method, c):
                return r
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "grand_means": self.grand_means,
            "failed_cells": self.failed_cells,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReportTable":
        return cls(
            rows=[ReportRow.from_dict(r) for r in data.get("rows", [])],
            grand_means={d: {m: float(v) for m, v in ms.items()} for d, ms in data.get("grand_means", {}).items()},
            failed_cells=int(data.get("failed_cells", 0)),
        )


def _frame(results: Sequence[CellResult]) -> pd.DataFrame:
    df = pd.DataFrame([r.to_dict() for r in results])
    df["total"] = total_error(df["train_error"], df["test_error"], df["n_train"], df["n_test"])
    return df


def _mean_vector(vectors: Sequence[Optional[List[float]]]) -> Optional[List[float]]:
    usable = [v for v in vectors if v is not None]
    if not usable:
        return None
    return [float(x) for x in np.mean(np.asarray(usable, dtype=float), axis=0)]


def aggregate(results: Sequence[CellResult]) -> ReportTable:
    if not results:
        raise ReportError("cannot aggregate an empty result list")
    configs: Dict[str, set] = {}
    for r in results:
        configs.setdefault(r.dataset_id, set()).add(r.config_id)
    mixed = sorted(d for d, ids in configs.items() if len(ids) > 1)
    if mixed:
        raise ReportError(f"results for {', '.join(mixed)} come from more than one experiment config; "
                          f"report each sweep from its own results log")
    ok = [r for r in results if r.ok]
    failed = len(results) - len(ok)
    if failed:
        logger.warning(f"[Report] {failed} failed cells excluded from aggregates")
    if not ok:
        return ReportTable(failed_cells=failed)

    df = _frame(ok)
    rows: List[ReportRow] = []
    for (dataset_id, method, c), group in df.groupby(["dataset_id", "method", "c"], sort=True):
        by_m = group.groupby("m_index")["train_error"].mean()
        best_index = by_m.index[int(np.argmin(by_m.to_numpy()))]   # ties -> smallest m index
        chosen = group[group["m_index"] == best_index]
        rows.append(ReportRow(
            dataset_id=str(dataset_id),
            method=str(method),
            c=int(c),
            m0=float(chosen["m0"].iloc[0]),
            train_mean=float(chosen["train_error"].mean()),
            train_std=float(chosen["train_error"].std(ddof=0)),
            test_mean=float(chosen["test_error"].mean()),
            test_std=float(chosen["test_error"].std(ddof=0)),
            total=float(chosen["total"].mean()),
            cells=int(len(chosen)),
            m_star=_mean_vector(chosen["m_star"].tolist()) if method == "proposed" else None,
        ))

    grand: Dict[str, Dict[str, float]] = {}
    for r in rows:
        grand.setdefault(r.dataset_id, {}).setdefault(r.method, [])
        grand[r.dataset_id][r.method].append(r.total)
    grand_means = {d: {m: float(np.mean(v)) for m, v in ms.items()} for d, ms in grand.items()}
    return ReportTable(rows=rows, grand_means=grand_means, failed_cells=failed)


# ----------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------

def _csv_text(table: ReportTable) -> str:
    records = []
    for r in table.rows:
        d = r.to_dict()
        d["m_star"] = "" if r.m_star is None else ";".join(repr(v) for v in r.m_star)
        records.append(d)
    df = pd.DataFrame(records, columns=CSV_COLUMNS)
    return df.to_csv(index=False, lineterminator="\n")


def _pm(r: Optional[ReportRow], mean: str, std: str) -> str:
    if r is None:
        return "-"
    return f"{getattr(r, mean):.4f} ± {getattr(r, std):.4f}"


def _m_cell(r: Optional[ReportRow]) -> str:
    if r is None:
        return "-"
    if r.m_star is not None:
        return "[" + ", ".join(f"{v:.2f}" for v in r.m_star) + "]"
    return f"{r.m0:.2f}"


MARKDOWN_HEADER = [
    f"| C | Methods | {METHOD_TITLES['baseline']} | {METHOD_TITLES['proposed']} |",
    "|---|---|---|---|",
]


def _markdown_text(table: ReportTable) -> str:
    if not table.rows:
        return "\n".join(MARKDOWN_HEADER) + "\n"

    lines: List[str] = []
    for dataset_id in table.datasets():
        cs = sorted({r.c for r in table.rows if r.dataset_id == dataset_id})

        def pick(method: str, c: int) -> Optional[ReportRow]:
            return table.row(dataset_id, method, c)

        lines.append(f"### {dataset_id}")
        lines.append("")
        lines.extend(MARKDOWN_HEADER)
        for label, mean, std in (("Train", "train_mean", "train_std"), ("Test", "test_mean", "test_std")):
            for i, c in enumerate(cs):
                lines.append(f"| {c} | {label if i == 0 else ''} | "
                             f"{_pm(pick('baseline', c), mean, std)} | {_pm(pick('proposed', c), mean, std)} |")
        for i, c in enumerate(cs):
            cells = [pick(method, c) for method in ("baseline", "proposed")]
            totals = ["-" if r is None else f"{r.total:.4f}" for r in cells]
            lines.append(f"| {c} | {'Total' if i == 0 else ''} | {totals[0]} | {totals[1]} |")
        means = table.grand_means.get(dataset_id, {})
        mean_cells = [f"{means[m]:.4f}" if m in means else "-" for m in ("baseline", "proposed")]
        lines.append(f"| Mean | | {mean_cells[0]} | {mean_cells[1]} |")
        for i, c in enumerate(cs):
            lines.append(f"| {c} | {'m & m' if i == 0 else ''} | "
                         f"{_m_cell(pick('baseline', c))} | {_m_cell(pick('proposed', c))} |")
        lines.append("")
    lines.append(f"Failed cells: {table.failed_cells}")
    return "\n".join(lines) + "\n"


def render_report(table: ReportTable, fmt: str) -> str:
    if fmt == "csv":
        return _csv_text(table)
    if fmt == "json":
        return dump_json(table.to_dict())
    if fmt == "markdown":
        return _markdown_text(table)
    raise ReportError(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def emit_report(table: ReportTable, fmt: str, path: str) -> str:
    text = render_report(table, fmt)
    atomic_write_text(path, text)
    logger.info(f"[Report] wrote {fmt} report with {len(table.rows)} rows to {path}")
    return path
