"""
GRANULA - Two-Stage Pipeline

Stage 1 (unsupervised): FCM granulation at a scalar fuzzifier m0.
Stage 2 (supervised):   PSO over the per-cluster fuzzification factors,
                        scored by the composite reconstruction objective.

Both the FCM baseline and the refined model degranulate through the same
single refine -> re-partition -> reconstruct pass, so a uniform factor
vector [m0, ..., m0] scores exactly the baseline training error. The
swarm always contains that particle, which makes the refined training
error never worse than the baseline.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Union

import numpy as np

from clustering.fcm import FcmConfig, FcmModel, fcm_fit
from core.errors import NumericError, ParameterError
from data.dataset import Dataset, as_matrix, check_same_width
from degranulation.reconstruction import (
    FuzzifierVector,
    ReconstructionResult,
    composite_objective,
    powered_memberships,
    reconstruct,
    reconstruct_scalar,
    reconstruction_error,
)
from optim.pso import PsoConfig, PsoResult, pso_minimize

logger = logging.getLogger("granula.pipeline.refine")


@dataclass
class EvalScores:
    train_error: float
    test_error: float

    def __post_init__(self):
        if self.train_error < 0 or self.test_error < 0:
            raise ParameterError("reconstruction errors must be non-negative")

    def to_dict(self) -> Dict[str, float]:
        return {"train_error": float(self.train_error), "test_error": float(self.test_error)}


@dataclass
class BaselineModel:
    """FCM granulation with one shared fuzzifier."""
    base: FcmModel
    prototypes: np.ndarray      # one prototype-update pass past the FCM output
    m: float
    train_error: float

    kind = "baseline"

    @property
    def n_features(self) -> int:
        return self.prototypes.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "prototypes": self.prototypes.tolist(),
            "m": float(self.m),
            "train_error": float(self.train_error),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BaselineModel":
        return cls(
            base=FcmModel.from_dict(data["base"]),
            prototypes=np.asarray(data["prototypes"], dtype=float),
            m=float(data["m"]),
            train_error=float(data["train_error"]),
        )


@dataclass
class RefinedModel:
    base: FcmModel
    fuzzifiers: FuzzifierVector
    prototypes: np.ndarray
    train_error: float
    pso_history: List[float] = field(default_factory=list)
    m0: float = 2.0
    pso_positions: List[List[float]] = field(default_factory=list)
    n_train: int = 0

    kind = "refined"

    @property
    def n_features(self) -> int:
        return self.prototypes.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "fuzzifiers": self.fuzzifiers.to_list(),
            "prototypes": self.prototypes.tolist(),
            "train_error": float(self.train_error),
            "pso_history": [float(v) for v in self.pso_history],
            "pso_positions": [list(map(float, p)) for p in self.pso_positions],
            "m0": float(self.m0),
            "n_train": int(self.n_train),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RefinedModel":
        return cls(
            base=FcmModel.from_dict(data["base"]),
            fuzzifiers=FuzzifierVector(data["fuzzifiers"]),
            prototypes=np.asarray(data["prototypes"], dtype=float),
            train_error=float(data["train_error"]),
            pso_history=[float(v) for v in data.get("pso_history", [])],
            m0=float(data.get("m0", 2.0)),
            pso_positions=[list(map(float, p)) for p in data.get("pso_positions", [])],
            n_train=int(data.get("n_train", 0)),
        )


Model = Union[BaselineModel, RefinedModel]


def model_from_dict(data: Dict[str, Any]) -> Model:
    kind = data.get("kind")
    if kind == BaselineModel.kind:
        return BaselineModel.from_dict(data)
    if kind == RefinedModel.kind:
        return RefinedModel.from_dict(data)
    raise ParameterError(f"unknown model kind {kind!r}")


def _rows(X: Any) -> np.ndarray:
    return X.rows if isinstance(X, Dataset) else as_matrix(X)


def fit_baseline(X_train: Any, c: int, m: float, fcm_cfg: FcmConfig) -> BaselineModel:
    rows = _rows(X_train)
    base = fcm_fit(rows, replace(fcm_cfg, c=c, m=m))
    evaluation = composite_objective(rows, base, FuzzifierVector.uniform(m, c))
    if evaluation.prototypes is None:
        raise NumericError(f"degenerate FCM degranulation at C={c}, m={m}")
    prototypes = evaluation.prototypes
    train = reconstruction_error(reconstruct_scalar(rows, prototypes, m), rows).error
    logger.info(f"[Pipeline] FCM baseline C={c} m={m}: train R_e={train:.6g} ({base.iterations_run} iterations)")
    return BaselineModel(base=base, prototypes=prototypes, m=m, train_error=train)


def evaluate_baseline(
    X_train: Any,
    X_eval: Any,
    c: int,
    m: float,
    fcm_cfg: FcmConfig,
) -> EvalScores:
    model = fit_baseline(X_train, c, m, fcm_cfg)
    return EvalScores(train_error=model.train_error, test_error=evaluate_model(model, X_eval))


def train_refined(
    X_train: Any,
    c: int,
    m0: float,
    fcm_cfg: FcmConfig,
    pso_cfg: PsoConfig,
) -> RefinedModel:
    if m0 <= 1:
        raise ParameterError(f"initial fuzzifier m0 must be > 1, got {m0}")
    low, high = pso_cfg.bounds(c)
    if np.any(low <= 1.0):
        raise ParameterError(f"PSO bounds_low must be > 1 for fuzzification factors, got {low.tolist()}")
    rows = _rows(X_train)
    n_train = rows.shape[0]
    base = fcm_fit(rows, replace(fcm_cfg, c=c, m=m0))

    if np.any(low > m0) or np.any(high < m0):
        # the seed particle [m0, ..., m0] must stay inside the search box
        pso_cfg = replace(pso_cfg, bounds_low=np.minimum(low, m0), bounds_high=np.maximum(high, m0))

    def fitness(position: np.ndarray) -> float:
        return composite_objective(rows, base, FuzzifierVector(position)).value

    result: PsoResult = pso_minimize(fitness, c, pso_cfg, seed_position=np.full(c, float(m0)))
    fuzzifiers = FuzzifierVector(result.best_position)
    final = composite_objective(rows, base, fuzzifiers)

    train_error = result.best_value / n_train
    logger.info(
        f"[Pipeline] refined C={c} m0={m0}: train R_e {result.history[0] / n_train:.6g} -> {train_error:.6g} "
        f"in {result.iterations_run} PSO iterations, m*={np.round(fuzzifiers.values, 4).tolist()}"
    )
    return RefinedModel(
        base=base,
        fuzzifiers=fuzzifiers,
        prototypes=final.prototypes,
        train_error=train_error,
        pso_history=result.history,
        m0=float(m0),
        pso_positions=result.position_history,
        n_train=n_train,
    )


def reconstruct_with(model: Model, X: Any) -> ReconstructionResult:
    """Degranulate X through a trained model: memberships from its prototypes, never refit."""
    rows = as_matrix(X)
    check_same_width(rows, model.n_features, "evaluation data")
    if isinstance(model, RefinedModel):
        x_hat = reconstruct(powered_memberships(rows, model.prototypes, model.fuzzifiers), model.prototypes)
    else:
        x_hat = reconstruct_scalar(rows, model.prototypes, model.m)
    return reconstruction_error(x_hat, rows)


def evaluate_refined(model: RefinedModel, X: Any) -> float:
    return reconstruct_with(model, X).error


def evaluate_model(model: Model, X: Any) -> float:
    """Held-out reconstruction error of either model kind."""
    return reconstruct_with(model, X).error
