"""
GRANULA - Particle Swarm Optimizer

Bounded global-best PSO used to search the fuzzification factor space.

  1. Initialize the swarm (optional seed particle, others uniform in bounds).
  2. Evaluate fitness.
  3. Update p_best per particle and g_best for the swarm.
  4. Update velocity (inertia + cognitive + social) and position (clamped).
  5. Repeat until max_iter or g_best stalls for stall_window iterations.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import OptimizerDegenerateError, ParameterError
from core.seeding import get_rng

logger = logging.getLogger("granula.optim.pso")

Fitness = Callable[[np.ndarray], float]


@dataclass
class PsoConfig:
    particles: int = 75
    max_iter: int = 500
    inertia_w: float = 0.8
    cognitive_c1: float = 1.49445
    social_c2: float = 1.49445
    stall_window: Optional[int] = None
    stall_eps: float = 1e-12
    bounds_low: Any = 1.05
    bounds_high: Any = 10.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.stall_window is None:
            self.stall_window = max(1, math.ceil(0.15 * self.max_iter))
        self._validate()

    def _validate(self):
        if self.particles < 2:
            raise ParameterError(f"PSO needs at least 2 particles, got {self.particles}")
        if self.max_iter < 0:
            raise ParameterError(f"PSO max_iter must be >= 0, got {self.max_iter}")
        if self.inertia_w < 0 or self.cognitive_c1 < 0 or self.social_c2 < 0:
            raise ParameterError("PSO inertia and acceleration weights must be non-negative")
        if self.stall_window < 1:
            raise ParameterError(f"PSO stall_window must be >= 1, got {self.stall_window}")
        if np.any(np.asarray(self.bounds_low, dtype=float) >= np.asarray(self.bounds_high, dtype=float)):
            raise ParameterError("PSO bounds_low must be strictly below bounds_high in every dimension")
        if self.workers < 1:
            raise ParameterError(f"PSO workers must be >= 1, got {self.workers}")

    def bounds(self, dim: int) -> Tuple[np.ndarray, np.ndarray]:
        low = np.broadcast_to(np.asarray(self.bounds_low, dtype=float), (dim,)).copy()
        high = np.broadcast_to(np.asarray(self.bounds_high, dtype=float), (dim,)).copy()
        return low, high

    def to_dict(self) -> Dict[str, Any]:
        def _plain(b):
            arr = np.asarray(b, dtype=float)
            return float(arr) if arr.ndim == 0 else arr.tolist()

        return {
            "particles": self.particles,
            "max_iter": self.max_iter,
            "inertia_w": self.inertia_w,
            "cognitive_c1": self.cognitive_c1,
            "social_c2": self.social_c2,
            "stall_window": self.stall_window,
            "stall_eps": self.stall_eps,
            "bounds_low": _plain(self.bounds_low),
            "bounds_high": _plain(self.bounds_high),
            "seed": self.seed,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PsoConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_value: float = float("inf")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_value: float
    history: List[float] = field(default_factory=list)
    position_history: List[List[float]] = field(default_factory=list)
    iterations_run: int = 0
    stopped_early: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best_position": self.best_position.tolist(),
            "best_value": float(self.best_value),
            "history": [float(v) for v in self.history],
            "position_history": [list(map(float, p)) for p in self.position_history],
            "iterations_run": int(self.iterations_run),
            "stopped_early": bool(self.stopped_early),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PsoResult":
        return cls(
            best_position=np.asarray(data["best_position"], dtype=float),
            best_value=float(data["best_value"]),
            history=[float(v) for v in data.get("history", [])],
            position_history=[list(map(float, p)) for p in data.get("position_history", [])],
            iterations_run=int(data.get("iterations_run", 0)),
            stopped_early=bool(data.get("stopped_early", False)),
        )


def update_velocity(
    p: Particle,
    g_best: np.ndarray,
    cfg: PsoConfig,
    r1: np.ndarray,
    r2: np.ndarray,
) -> np.ndarray:
    v_new = (
        cfg.inertia_w * p.velocity
        + cfg.cognitive_c1 * r1 * (p.best_position - p.position)
        + cfg.social_c2 * r2 * (g_best - p.position)
    )
    low, high = cfg.bounds(p.position.size)
    v_max = high - low
    return np.clip(v_new, -v_max, v_max)


def update_position(
    p: Particle,
    v_new: np.ndarray,
    bounds: Tuple[np.ndarray, np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """New position clamped to bounds; clamped components lose their velocity."""
    low, high = bounds
    raw = p.position + v_new
    position = np.clip(raw, low, high)
    velocity = np.where(position != raw, 0.0, v_new)
    return position, velocity


def _safe(value: Any) -> float:
    value = float(value)
    return float("inf") if math.isnan(value) else value


class _Evaluator:
    """Fitness over a batch of positions, sequential or on a thread pool; order preserved."""

    def __init__(self, fitness: Fitness, workers: int):
        self.fitness = fitness
        self.pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def __call__(self, positions: Sequence[np.ndarray]) -> List[float]:
        if self.pool is None:
            return [_safe(self.fitness(x.copy())) for x in positions]
        return [_safe(v) for v in self.pool.map(lambda x: self.fitness(x.copy()), positions)]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)


def pso_minimize(
    fitness: Fitness,
    dim: int,
    cfg: PsoConfig,
    seed_position: Optional[Sequence[float]] = None,
) -> PsoResult:
    if dim < 1:
        raise ParameterError(f"PSO dimension must be >= 1, got {dim}")
    rng = get_rng(cfg.seed)
    low, high = cfg.bounds(dim)

    positions = rng.uniform(low, high, size=(cfg.particles, dim))
    if seed_position is not None:
        seed = np.asarray(seed_position, dtype=float).reshape(-1)
        if seed.size != dim:
            raise ParameterError(f"seed position has {seed.size} entries, expected {dim}")
        clipped = np.clip(seed, low, high)
        if np.any(clipped != seed):
            logger.warning(f"[PSO] seed position {seed.tolist()} clipped into bounds")
        positions[0] = clipped

    evaluate = _Evaluator(fitness, cfg.workers)
    try:
        if cfg.max_iter == 0 and seed_position is not None:
            # nothing to optimize: report the starting point
            value = evaluate([positions[0]])[0]
            if math.isinf(value):
                raise OptimizerDegenerateError("fitness is infinite at the seed position")
            return PsoResult(positions[0].copy(), value, [value], [positions[0].tolist()], 0, False)

        values = evaluate(list(positions))
        swarm = [
            Particle(position=positions[i].copy(), velocity=np.zeros(dim),
                     best_position=positions[i].copy(), best_value=values[i])
            for i in range(cfg.particles)
        ]
        best_values = np.array([p.best_value for p in swarm])
        if np.all(np.isinf(best_values)):
            raise OptimizerDegenerateError("every initial particle has infinite fitness")

        g_index = int(np.argmin(best_values))
        g_best = swarm[g_index].best_position.copy()
        g_value = float(best_values[g_index])
        history = [g_value]
        position_history = [g_best.tolist()]
        stall = 0
        stopped_early = False
        iterations = 0

        for iterations in range(1, cfg.max_iter + 1):
            for p in swarm:
                r1 = rng.random(dim)
                r2 = rng.random(dim)
                v_new = update_velocity(p, g_best, cfg, r1, r2)
                p.position, p.velocity = update_position(p, v_new, (low, high))

            values = evaluate([p.position for p in swarm])
            for p, value in zip(swarm, values):
                if value < p.best_value:
                    p.best_value = value
                    p.best_position = p.position.copy()

            # ties go to the lowest particle index
            best_values = np.array([p.best_value for p in swarm])
            g_index = int(np.argmin(best_values))
            improvement = 0.0
            if best_values[g_index] < g_value:
                improvement = g_value - float(best_values[g_index])
                g_value = float(best_values[g_index])
                g_best = swarm[g_index].best_position.copy()
            history.append(g_value)
            position_history.append(g_best.tolist())

            stall = stall + 1 if improvement < cfg.stall_eps else 0
            if stall >= cfg.stall_window:
                stopped_early = True
                logger.debug(f"[PSO] g_best stalled for {stall} iterations; stopping at {iterations}")
                break
    finally:
        evaluate.close()

    logger.debug(f"[PSO] finished after {iterations} iterations, g_best={g_value:.10g}")
    return PsoResult(
        best_position=g_best,
        best_value=g_value,
        history=history,
        position_history=position_history,
        iterations_run=iterations,
        stopped_early=stopped_early,
    )
