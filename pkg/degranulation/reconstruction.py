"""
GRANULA - Degranulation

Reconstruction of numeric data from prototypes and membership grades,
with one fuzzification factor per cluster.

  powered grade    u_ji = [sum_k (d_ij / d_ik)^(2/(m_j-1))]^(-m_j)
  refinement       v_j  = sum_i u_ji x_i / sum_i u_ji
  reconstruction   x_i  = sum_j u_ji v_j / sum_j u_ji
  error            R_e  = ||X_hat - X||_2 / N

With all m_j equal the powered grades are the FCM memberships raised to m,
and refinement is the FCM prototype update.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from clustering.fcm import FcmModel, sq_distances, weighted_means
from core.errors import (
    DeadClusterError,
    DimensionError,
    IsolatedDatumError,
    NumericError,
    ParameterError,
)
from data.dataset import as_matrix
from degranulation.spectral import spectral_norm

logger = logging.getLogger("granula.degranulation.reconstruction")


@dataclass
class FuzzifierVector:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size == 0:
            raise ParameterError("FuzzifierVector must not be empty")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 1.0):
            raise ParameterError(f"every fuzzification factor must be finite and > 1, got {self.values.tolist()}")

    @classmethod
    def uniform(cls, m: float, c: int) -> "FuzzifierVector":
        return cls(np.full(c, float(m)))

    def __len__(self) -> int:
        return self.values.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def to_list(self):
        return [float(v) for v in self.values]


@dataclass
class PoweredPartition:
    grades_pow: np.ndarray      # C x N, entry (j, i) = mu_ij ** m_j

    def __post_init__(self):
        self.grades_pow = np.asarray(self.grades_pow, dtype=float)
        if self.grades_pow.ndim != 2:
            raise DimensionError(f"powered partition must be C x N, got shape {self.grades_pow.shape}")


@dataclass
class ReconstructionResult:
    x_hat: np.ndarray
    error: float
    raw_norm: float

    def to_dict(self) -> Dict[str, Any]:
        return {"x_hat": self.x_hat.tolist(), "error": float(self.error), "raw_norm": float(self.raw_norm)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReconstructionResult":
        return cls(np.asarray(data["x_hat"], dtype=float), float(data["error"]), float(data["raw_norm"]))


@dataclass
class CompositeEvaluation:
    """Composite objective value plus the refined artifacts (None when degenerate)."""
    value: float
    prototypes: Optional[np.ndarray] = None
    powered: Optional[PoweredPartition] = None

    def __iter__(self):
        return iter((self.value, self.prototypes, self.powered))


def _as_fuzzifiers(m: Any, n_clusters: int) -> np.ndarray:
    values = m.values if isinstance(m, FuzzifierVector) else FuzzifierVector(m).values
    if values.size != n_clusters:
        raise DimensionError(f"{values.size} fuzzification factors for {n_clusters} prototypes")
    return values


def _log_memberships(d2: np.ndarray, fuzzifiers: np.ndarray) -> np.ndarray:
    """log mu_ij with row-specific exponents; columns must have no zero distance."""
    log_d2 = np.log(d2)
    # t[j, k, i] = (log d2_ij - log d2_ik) / (m_j - 1)
    t = (log_d2[:, None, :] - log_d2[None, :, :]) / (fuzzifiers - 1.0)[:, None, None]
    t_max = t.max(axis=1)
    log_sum = t_max + np.log(np.exp(t - t_max[:, None, :]).sum(axis=1))
    return -log_sum


def _zero_distance_grades(d2: np.ndarray) -> np.ndarray:
    zero = d2 == 0.0
    return zero / zero.sum(axis=0)


def vector_memberships(X: Any, V: Any, m: Any) -> np.ndarray:
    """Un-powered grades mu_ij under per-cluster fuzzifiers (C x N)."""
    d2 = sq_distances(X, V)
    fuzzifiers = _as_fuzzifiers(m, d2.shape[0])
    grades = np.empty_like(d2)
    coincident = np.any(d2 == 0.0, axis=0)
    if np.any(coincident):
        grades[:, coincident] = _zero_distance_grades(d2[:, coincident])
    if np.any(~coincident):
        grades[:, ~coincident] = np.exp(_log_memberships(d2[:, ~coincident], fuzzifiers))
    return grades


def powered_memberships(X: Any, V: Any, m: Any) -> PoweredPartition:
    d2 = sq_distances(X, V)
    fuzzifiers = _as_fuzzifiers(m, d2.shape[0])
    grades = np.empty_like(d2)
    coincident = np.any(d2 == 0.0, axis=0)
    if np.any(coincident):
        # ties share the grade as in FCM, then take the power
        grades[:, coincident] = _zero_distance_grades(d2[:, coincident]) ** fuzzifiers[:, None]
    if np.any(~coincident):
        log_mu = _log_memberships(d2[:, ~coincident], fuzzifiers)
        grades[:, ~coincident] = np.exp(fuzzifiers[:, None] * log_mu)
    return PoweredPartition(grades)


def refine_prototypes(X: Any, Upow: PoweredPartition) -> np.ndarray:
    rows = as_matrix(X)
    grades = Upow.grades_pow
    if grades.shape[1] != rows.shape[0]:
        raise DimensionError(f"powered partition has {grades.shape[1]} columns for {rows.shape[0]} data rows")
    return weighted_means(rows, grades)


def reconstruct(Upow: PoweredPartition, V: Any) -> np.ndarray:
    protos = as_matrix(V)
    grades = Upow.grades_pow
    if grades.shape[0] != protos.shape[0]:
        raise DimensionError(f"powered partition has {grades.shape[0]} rows for {protos.shape[0]} prototypes")
    totals = grades.sum(axis=0)
    isolated = np.flatnonzero(~(totals > 0))
    if isolated.size:
        raise IsolatedDatumError(int(isolated[0]))
    return (grades.T @ protos) / totals[:, None]


def reconstruct_scalar(X: Any, V: Any, m: float) -> np.ndarray:
    """Generic FCM degranulation: one fuzzifier shared by every cluster."""
    if m <= 1:
        raise ParameterError(f"fuzzifier m must be > 1, got {m}")
    n_clusters = as_matrix(V).shape[0]
    return reconstruct(powered_memberships(X, V, FuzzifierVector.uniform(m, n_clusters)), V)


def reconstruction_error(X_hat: Any, X: Any) -> ReconstructionResult:
    x_hat = as_matrix(X_hat)
    rows = as_matrix(X)
    if x_hat.shape != rows.shape:
        raise DimensionError(f"reconstruction shape {x_hat.shape} differs from data shape {rows.shape}")
    raw = spectral_norm(x_hat - rows, fallback=True)
    return ReconstructionResult(x_hat=x_hat, error=raw / rows.shape[0], raw_norm=raw)


def composite_objective(X: Any, base: FcmModel, m: Any) -> CompositeEvaluation:
    """One refine -> re-partition -> reconstruct pass; degenerate passes score +inf."""
    rows = as_matrix(X)
    try:
        fuzzifiers = FuzzifierVector(_as_fuzzifiers(m, base.n_clusters))
        initial = powered_memberships(rows, base.prototypes, fuzzifiers)
        refined = refine_prototypes(rows, initial)
        repartitioned = powered_memberships(rows, refined, fuzzifiers)
        x_hat = reconstruct(repartitioned, refined)
        value = spectral_norm(x_hat - rows, fallback=True)
    except (DeadClusterError, IsolatedDatumError, NumericError) as e:
        logger.debug(f"[Composite] degenerate evaluation at m={np.asarray(getattr(m, 'values', m)).tolist()}: {e}")
        return CompositeEvaluation(float("inf"))
    if not np.isfinite(value):
        return CompositeEvaluation(float("inf"))
    return CompositeEvaluation(value, refined, repartitioned)
