"""
GRANULA - Plot Data

Tab-separated series for external plotting (no rendering here):
  pso_history      iteration, g_best, reconstruction_error
  fuzzifier_trace  iteration, m_1 .. m_C  (g_best position per iteration)
  membership_grid  x1, x2, mu_1 .. mu_C   (2-D data only)
  error_bars       method, c, train_mean, train_std, test_mean, test_std
"""

import logging
from typing import Any, Optional, Sequence, Union

import numpy as np
import pandas as pd

from clustering.fcm import FcmModel
from core.errors import DimensionError, ParameterError
from core.storage import atomic_write_text
from data.dataset import as_matrix
from degranulation.reconstruction import FuzzifierVector, vector_memberships
from experiment.cell_result import CellResult
from experiment.report import aggregate
from pipeline.refine import BaselineModel, RefinedModel

logger = logging.getLogger("granula.experiment.plot_data")

KINDS = ("pso_history", "fuzzifier_trace", "membership_grid", "error_bars")

Source = Union[RefinedModel, BaselineModel, FcmModel, Sequence[CellResult]]


def _require_refined(source: Any, kind: str) -> RefinedModel:
    if not isinstance(source, RefinedModel):
        raise ParameterError(f"{kind} needs a refined model, got {type(source).__name__}")
    return source


def pso_history_frame(model: RefinedModel) -> pd.DataFrame:
    history = np.asarray(model.pso_history, dtype=float)
    n = model.n_train or 1
    return pd.DataFrame({
        "iteration": np.arange(history.size),
        "g_best": history,
        "reconstruction_error": history / n,
    })


def fuzzifier_trace_frame(model: RefinedModel) -> pd.DataFrame:
    positions = np.asarray(model.pso_positions, dtype=float)
    if positions.size == 0:
        positions = model.fuzzifiers.values.reshape(1, -1)
    frame = pd.DataFrame(positions, columns=[f"m_{j + 1}" for j in range(positions.shape[1])])
    frame.insert(0, "iteration", np.arange(positions.shape[0]))
    return frame


def _grid_model(source: Any):
    if isinstance(source, RefinedModel):
        return source.prototypes, source.fuzzifiers
    if isinstance(source, BaselineModel):
        return source.prototypes, FuzzifierVector.uniform(source.m, source.prototypes.shape[0])
    if isinstance(source, FcmModel):
        return source.prototypes, FuzzifierVector.uniform(source.fuzzifier, source.n_clusters)
    raise ParameterError(f"membership_grid needs a model, got {type(source).__name__}")


def membership_grid_frame(
    source: Any,
    data: Optional[Any] = None,
    grid_size: int = 50,
    margin: float = 0.1,
) -> pd.DataFrame:
    prototypes, fuzzifiers = _grid_model(source)
    if prototypes.shape[1] != 2:
        raise DimensionError(f"membership_grid needs 2-D data, model has {prototypes.shape[1]} features")
    if grid_size < 2:
        raise ParameterError(f"grid_size must be >= 2, got {grid_size}")

    hull = as_matrix(data) if data is not None else prototypes
    if hull.shape[1] != 2:
        raise DimensionError(f"membership_grid needs 2-D data, got {hull.shape[1]} features")
    low, high = hull.min(axis=0), hull.max(axis=0)
    span = np.where(high > low, high - low, 1.0)
    low, high = low - margin * span, high + margin * span

    xs = np.linspace(low[0], high[0], grid_size)
    ys = np.linspace(low[1], high[1], grid_size)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    grades = vector_memberships(points, prototypes, fuzzifiers)

    frame = pd.DataFrame(points, columns=["x1", "x2"])
    for j in range(grades.shape[0]):
        frame[f"mu_{j + 1}"] = grades[j]
    return frame


def error_bars_frame(results: Sequence[CellResult]) -> pd.DataFrame:
    table = aggregate(list(results))
    records = [
        {
            "method": r.method, "c": r.c,
            "train_mean": r.train_mean, "train_std": r.train_std,
            "test_mean": r.test_mean, "test_std": r.test_std,
        }
        for r in sorted(table.rows, key=lambda r: (r.method, r.c))
    ]
    return pd.DataFrame(records, columns=["method", "c", "train_mean", "train_std", "test_mean", "test_std"])


def plot_frame(source: Source, kind: str, **options: Any) -> pd.DataFrame:
    if kind == "pso_history":
        return pso_history_frame(_require_refined(source, kind))
    if kind == "fuzzifier_trace":
        return fuzzifier_trace_frame(_require_refined(source, kind))
    if kind == "membership_grid":
        return membership_grid_frame(source, **options)
    if kind == "error_bars":
        if isinstance(source, (RefinedModel, BaselineModel, FcmModel)):
            raise ParameterError("error_bars needs sweep results, not a model")
        return error_bars_frame(source)
    raise ParameterError(f"unknown plot kind {kind!r}; expected one of {KINDS}")


def emit_plot_data(source: Source, kind: str, path: str, **options: Any) -> str:
    frame = plot_frame(source, kind, **options)
    atomic_write_text(path, frame.to_csv(sep="\t", index=False, lineterminator="\n"))
    logger.info(f"[PlotData] wrote {kind}: {len(frame)} rows to {path}")
    return path
