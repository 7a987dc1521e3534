"""
GRANULA - Fuzzy C-Means

Granulation stage: prototypes and partition matrix from alternating
membership / prototype updates.

Partition matrices are cluster-major (C x N): row j is cluster j,
column i is datum i. Distances are plain Euclidean; data is expected to
be z-scored by the caller, which makes the feature weights unit.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from core.errors import (
    DeadClusterError,
    DegenerateDataError,
    DimensionError,
    NumericError,
    ParameterError,
)
from core.seeding import get_rng
from data.dataset import Dataset, as_matrix

logger = logging.getLogger("granula.clustering.fcm")


@dataclass
class FcmConfig:
    c: int = 3
    m: float = 2.0
    tol: float = 1e-5
    max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.m <= 1:
            raise ParameterError(f"FCM fuzzifier m must be > 1, got {self.m}")
        if self.c < 1:
            raise ParameterError(f"FCM cluster count must be >= 1, got {self.c}")
        if self.tol <= 0:
            raise ParameterError(f"FCM tolerance must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ParameterError(f"FCM max_iter must be >= 1, got {self.max_iter}")

    def to_dict(self) -> Dict[str, Any]:
        return {"c": self.c, "m": self.m, "tol": self.tol, "max_iter": self.max_iter, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FcmConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class FcmModel:
    prototypes: np.ndarray          # C x n
    partition: np.ndarray           # C x N
    fuzzifier: float
    iterations_run: int
    final_delta: float
    objective_trace: List[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.prototypes.shape[0]

    def predict_memberships(self, X: Any) -> np.ndarray:
        """Memberships of (possibly unseen) data against the trained prototypes."""
        return update_memberships(X, self.prototypes, self.fuzzifier)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "prototypes": self.prototypes.tolist(),
            "partition": self.partition.tolist(),
            "fuzzifier": float(self.fuzzifier),
            "iterations_run": int(self.iterations_run),
            "final_delta": float(self.final_delta),
            "objective_trace": [float(v) for v in self.objective_trace],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FcmModel":
        return cls(
            prototypes=np.asarray(data["prototypes"], dtype=float),
            partition=np.asarray(data["partition"], dtype=float),
            fuzzifier=float(data["fuzzifier"]),
            iterations_run=int(data.get("iterations_run", 0)),
            final_delta=float(data.get("final_delta", 0.0)),
            objective_trace=[float(v) for v in data.get("objective_trace", [])],
        )


def sq_distance(x: np.ndarray, v: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape:
        raise DimensionError(f"vector lengths differ: {x.shape} vs {v.shape}")
    diff = x - v
    return float(diff @ diff)


def sq_distances(X: Any, V: Any) -> np.ndarray:
    """C x N matrix of squared Euclidean distances ||x_i - v_j||^2."""
    rows = as_matrix(X)
    protos = as_matrix(V)
    if rows.shape[1] != protos.shape[1]:
        raise DimensionError(f"data has {rows.shape[1]} features, prototypes have {protos.shape[1]}")
    diff = rows[None, :, :] - protos[:, None, :]
    return np.einsum("jik,jik->ji", diff, diff)


def _coincident_columns(d2: np.ndarray) -> np.ndarray:
    """Data sitting exactly on at least one prototype."""
    return np.any(d2 == 0.0, axis=0)


def _split_ties(zero_mask: np.ndarray) -> np.ndarray:
    """1/k on each of the k coincident prototypes, 0 elsewhere."""
    counts = zero_mask.sum(axis=0)
    return zero_mask / counts


def update_memberships(X: Any, V: Any, m: float) -> np.ndarray:
    if m <= 1:
        raise ParameterError(f"fuzzifier m must be > 1, got {m}")
    d2 = sq_distances(X, V)
    n_clusters, n_data = d2.shape
    if n_clusters == 1:
        return np.ones((1, n_data))

    U = np.empty_like(d2)
    coincident = _coincident_columns(d2)
    if np.any(coincident):
        U[:, coincident] = _split_ties(d2[:, coincident] == 0.0)

    regular = ~coincident
    if np.any(regular):
        # (d_ij / d_ik)^(2/(m-1)) == exp((log d2_ij - log d2_ik) / (m-1)); shift by the column max
        logits = -np.log(d2[:, regular]) / (m - 1.0)
        logits -= logits.max(axis=0, keepdims=True)
        weights = np.exp(logits)
        U[:, regular] = weights / weights.sum(axis=0, keepdims=True)
    return U


def weighted_means(rows: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row j = sum_i W_ji x_i / sum_i W_ji."""
    totals = W.sum(axis=1)
    for j, total in enumerate(totals):
        if not total > 0:
            raise DeadClusterError(j)
    return (W @ rows) / totals[:, None]


def update_prototypes(X: Any, U: np.ndarray, m: float) -> np.ndarray:
    rows = as_matrix(X)
    U = np.asarray(U, dtype=float)
    if U.shape[1] != rows.shape[0]:
        raise DimensionError(f"partition has {U.shape[1]} columns for {rows.shape[0]} data rows")
    return weighted_means(rows, U ** m)


def objective_j(X: Any, U: np.ndarray, V: Any, m: float) -> float:
    d2 = sq_distances(X, V)
    U = np.asarray(U, dtype=float)
    if U.shape != d2.shape:
        raise DimensionError(f"partition shape {U.shape} does not match {d2.shape}")
    return float(np.sum((U ** m) * d2))


def init_prototypes(X: Any, c: int, seed: int) -> np.ndarray:
    """c distinct data rows sampled without replacement."""
    rows = as_matrix(X)
    n_distinct = np.unique(rows, axis=0).shape[0]
    if c > n_distinct:
        raise DegenerateDataError(f"cannot pick {c} distinct prototypes from {n_distinct} distinct rows")

    chosen: List[int] = []
    seen = set()
    for idx in get_rng(seed).permutation(rows.shape[0]):
        key = rows[idx].tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(int(idx))
        if len(chosen) == c:
            break
    return rows[chosen].copy()


def fcm_fit(X: Any, cfg: FcmConfig, init: Optional[Any] = None) -> FcmModel:
    """Alternate prototype and membership updates; init overrides the seeded start."""
    rows = X.rows if isinstance(X, Dataset) else as_matrix(X)
    m = cfg.m

    if init is None:
        V = init_prototypes(rows, cfg.c, cfg.seed)
    else:
        V = as_matrix(init).copy()
        if V.shape != (cfg.c, rows.shape[1]):
            raise DimensionError(f"initial prototypes have shape {V.shape}, expected {(cfg.c, rows.shape[1])}")
    U = update_memberships(rows, V, m)
    trace = [objective_j(rows, U, V, m)]
    delta = float("inf")
    iterations = 0

    for iterations in range(1, cfg.max_iter + 1):
        V = update_prototypes(rows, U, m)
        U_next = update_memberships(rows, V, m)
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(U_next))):
            raise NumericError(f"non-finite prototypes or memberships at FCM iteration {iterations}")
        delta = float(np.max(np.abs(U_next - U)))
        U = U_next
        trace.append(objective_j(rows, U, V, m))
        logger.debug(f"[FCM] iter {iterations}: J={trace[-1]:.10g} delta={delta:.3g}")
        if delta <= cfg.tol:
            break

    if delta > cfg.tol:
        logger.warning(f"[FCM] hit max_iter={cfg.max_iter} with delta={delta:.3g} > tol={cfg.tol}")
    else:
        logger.debug(f"[FCM] converged in {iterations} iterations (C={cfg.c}, m={m})")

    return FcmModel(
        prototypes=V,
        partition=U,
        fuzzifier=m,
        iterations_run=iterations,
        final_delta=delta,
        objective_trace=trace,
    )
