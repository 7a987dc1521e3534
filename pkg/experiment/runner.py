"""
GRANULA - Sweep Runner

Queue-based execution of the cross-validation protocol:
  - One task per (C, m0, fold, repeat); each task yields a baseline and a
    proposed CellResult.
  - Worker threads drain the task queue; results are appended to the NDJSON
    log as they complete, so an interrupted sweep resumes from the log.
  - Every record carries the config fingerprint; resume only reuses records
    written under the same settings.
  - Seeds come from the master seed and the cell coordinates. The FCM seed
    ignores the method, so both methods granulate identically.
"""

import logging
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Set

import numpy as np
import psutil

from clustering.fcm import FcmConfig
from core.errors import ParameterError
from core.seeding import derive_seed, fingerprint
from core.storage import ResultsLog
from data.catalog import load_dataset
from data.dataset import Dataset, FoldPlan, SyntheticSpec, kfold_split, normalize_zscore
from experiment.cell_result import CellKey, CellResult, record_key
from optim.pso import PsoConfig
from pipeline.refine import evaluate_baseline, evaluate_refined, train_refined

logger = logging.getLogger("granula.experiment.runner")


def default_m_values() -> List[float]:
    return [round(1.1 + 0.5 * k, 10) for k in range(9)]


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    dataset_id: Optional[str] = None
    has_header: Optional[bool] = None
    drop_last_column: Optional[bool] = None
    drop_first_columns: Optional[int] = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    normalize: bool = True
    c_values: List[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    m_values: List[float] = field(default_factory=default_m_values)
    folds: int = 5
    repeats: int = 10
    refold_per_repeat: bool = True
    fcm: FcmConfig = field(default_factory=FcmConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    master_seed: int = 0
    record_timing: bool = False

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if not self.c_values or not self.m_values:
            raise ParameterError("c_values and m_values must be non-empty")
        if any(m <= 1 for m in self.m_values):
            raise ParameterError(f"every m must be > 1, got {self.m_values}")
        if any(c < 1 for c in self.c_values):
            raise ParameterError(f"every C must be >= 1, got {self.c_values}")
        if self.folds < 2:
            raise ParameterError(f"folds must be >= 2, got {self.folds}")
        if self.repeats < 1:
            raise ParameterError(f"repeats must be >= 1, got {self.repeats}")
        if np.any(np.asarray(self.pso.bounds_low, dtype=float) <= 1.0):
            raise ParameterError(f"PSO bounds_low must be > 1, got {self.pso.bounds_low}")

    @property
    def config_id(self) -> str:
        """Fingerprint of every setting that changes cell results."""
        data = self.to_dict()
        data.pop("record_timing")
        data["pso"].pop("workers")
        return fingerprint(data)

    @property
    def cell_count(self) -> int:
        return len(self.c_values) * len(self.m_values) * self.folds * self.repeats * 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset": self.dataset,
            "dataset_id": self.dataset_id,
            "has_header": self.has_header,
            "drop_last_column": self.drop_last_column,
            "drop_first_columns": self.drop_first_columns,
            "synthetic": self.synthetic.to_dict(),
            "normalize": self.normalize,
            "c_values": list(self.c_values),
            "m_values": list(self.m_values),
            "folds": self.folds,
            "repeats": self.repeats,
            "refold_per_repeat": self.refold_per_repeat,
            "fcm": self.fcm.to_dict(),
            "pso": self.pso.to_dict(),
            "master_seed": self.master_seed,
            "record_timing": self.record_timing,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if isinstance(known.get("synthetic"), dict):
            known["synthetic"] = SyntheticSpec.from_dict(known["synthetic"])
        if isinstance(known.get("fcm"), dict):
            known["fcm"] = FcmConfig.from_dict(known["fcm"])
        if isinstance(known.get("pso"), dict):
            known["pso"] = PsoConfig.from_dict(known["pso"])
        if "dataset_ref" in data and "dataset" not in data:
            known["dataset"] = data["dataset_ref"]
        return cls(**known)


@dataclass
class CellTask:
    c: int
    m_index: int
    m0: float
    fold: int
    repeat: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    methods: Set[str]


def prepare_dataset(cfg: ExperimentConfig) -> Dataset:
    dataset = load_dataset(
        cfg.dataset,
        has_header=cfg.has_header,
        drop_last_column=cfg.drop_last_column,
        drop_first_columns=cfg.drop_first_columns,
        synthetic=cfg.synthetic,
    )
    if cfg.normalize:
        dataset, _ = normalize_zscore(dataset)
    return dataset


def fold_plan(cfg: ExperimentConfig, dataset_id: str, n_rows: int, repeat: int) -> FoldPlan:
    stream = repeat if cfg.refold_per_repeat else 0
    return kfold_split(n_rows, cfg.folds, derive_seed(cfg.master_seed, dataset_id, "folds", stream))


def system_stats() -> Dict[str, Any]:
    return {
        "cpu_count": psutil.cpu_count(logical=True),
        "cpu_percent": psutil.cpu_percent(interval=None),
        "memory_percent": psutil.virtual_memory().percent,
    }


def resolve_jobs(jobs: int) -> int:
    """jobs <= 0 means one worker per physical core."""
    if jobs > 0:
        return jobs
    return max(1, psutil.cpu_count(logical=False) or 1)


class SweepRunner:
    """Runs every cell of an ExperimentConfig on a pool of worker threads."""

    def __init__(self, cfg: ExperimentConfig, results_path: Optional[str] = None, jobs: int = 1):
        self.cfg = cfg
        self.jobs = resolve_jobs(jobs)
        self.log = ResultsLog(results_path, record_key) if results_path else None
        self.task_queue: "queue.Queue[Optional[CellTask]]" = queue.Queue()
        self.results: Dict[CellKey, CellResult] = {}
        self._lock = threading.Lock()
        self.dataset: Optional[Dataset] = None
        self.dataset_id = ""
        self.config_id = cfg.config_id

    # ------------------------------------------------------------------
    # Cell execution
    # ------------------------------------------------------------------

    def _keys(self, task: CellTask, method: str) -> Dict[str, Any]:
        return {
            "dataset_id": self.dataset_id, "config_id": self.config_id,
            "c": task.c, "m0": task.m0, "m_index": task.m_index,
            "fold": task.fold, "repeat": task.repeat, "method": method,
        }

    def _seeds(self, task: CellTask):
        coords = (self.dataset_id, task.c, task.m_index, task.fold, task.repeat)
        return derive_seed(self.cfg.master_seed, *coords, "fcm"), derive_seed(self.cfg.master_seed, *coords, "pso")

    def _run_baseline(self, task: CellTask, X_train: Dataset, X_test: Dataset, fcm_cfg: FcmConfig) -> CellResult:
        started = time.perf_counter()
        scores = evaluate_baseline(X_train, X_test, task.c, task.m0, fcm_cfg)
        return CellResult(
            **self._keys(task, "baseline"),
            train_error=scores.train_error, test_error=scores.test_error,
            n_train=X_train.n_rows, n_test=X_test.n_rows,
            elapsed=self._elapsed(started),
        )

    def _run_proposed(self, task: CellTask, X_train: Dataset, X_test: Dataset,
                      fcm_cfg: FcmConfig, pso_cfg: PsoConfig) -> CellResult:
        started = time.perf_counter()
        model = train_refined(X_train, task.c, task.m0, fcm_cfg, pso_cfg)
        return CellResult(
            **self._keys(task, "proposed"),
            train_error=model.train_error, test_error=evaluate_refined(model, X_test),
            n_train=X_train.n_rows, n_test=X_test.n_rows,
            m_star=model.fuzzifiers.to_list(),
            elapsed=self._elapsed(started),
        )

    def _elapsed(self, started: float) -> float:
        return time.perf_counter() - started if self.cfg.record_timing else 0.0

    def run_cell(self, task: CellTask) -> List[CellResult]:
        X_train = self.dataset.subset(task.train_idx)
        X_test = self.dataset.subset(task.test_idx)
        fcm_seed, pso_seed = self._seeds(task)
        fcm_cfg = replace(self.cfg.fcm, c=task.c, m=task.m0, seed=fcm_seed)
        pso_cfg = replace(self.cfg.pso, seed=pso_seed)

        out = []
        for method in ("baseline", "proposed"):
            if method not in task.methods:
                continue
            try:
                if method == "baseline":
                    result = self._run_baseline(task, X_train, X_test, fcm_cfg)
                else:
                    result = self._run_proposed(task, X_train, X_test, fcm_cfg, pso_cfg)
            except Exception as e:
                logger.warning(f"[Runner] {method} cell C={task.c} m0={task.m0} fold={task.fold} "
                               f"rep={task.repeat} failed: {e}")
                result = CellResult.failure(f"{type(e).__name__}: {e}", **self._keys(task, method))
            out.append(result)
        return out

    def _record(self, results: List[CellResult]) -> None:
        with self._lock:
            for r in results:
                self.results[r.key] = r
                if self.log is not None:
                    self.log.append(r.to_dict())
        for r in results:
            logger.info(f"[Runner] {r!r}")

    def _record_failure(self, task: CellTask, error: Exception) -> None:
        """Failed records for every method of the task that has no result yet."""
        with self._lock:
            pending = [
                CellResult.failure(f"{type(error).__name__}: {error}", **self._keys(task, method))
                for method in sorted(task.methods)
            ]
            pending = [r for r in pending if r.key not in self.results]
            for r in pending:
                self.results[r.key] = r
            if self.log is not None:
                try:
                    for r in pending:
                        self.log.append(r.to_dict())
                except Exception as e:
                    logger.error(f"[Runner] could not log failed cells: {e}")

    def _worker(self):
        while True:
            task = self.task_queue.get()
            try:
                if task is None:
                    return
                self._record(self.run_cell(task))
            except Exception as e:
                logger.error(f"[Runner] Worker error on C={task.c} m0={task.m0} fold={task.fold} "
                             f"rep={task.repeat}: {e}")
                self._record_failure(task, e)
            finally:
                self.task_queue.task_done()

    # ------------------------------------------------------------------
    # Sweep
    # ------------------------------------------------------------------

    def _resume(self) -> Set[CellKey]:
        if self.log is None:
            return set()
        done = set()
        foreign = 0
        for record in self.log.load():
            result = CellResult.from_dict(record)
            if result.dataset_id != self.dataset_id:
                continue
            if result.config_id != self.config_id:
                foreign += 1
                continue
            self.results[result.key] = result
            done.add(result.key)
        if foreign:
            logger.warning(f"[Runner] {foreign} {self.dataset_id} records in {self.log.path} come from "
                           f"another experiment config; ignored (this config: {self.config_id})")
        if done:
            logger.info(f"[Runner] Resuming: {len(done)} cells already in {self.log.path}")
        return done

    def _tasks(self, done: Set[CellKey]) -> List[CellTask]:
        cfg = self.cfg
        tasks = []
        for repeat in range(cfg.repeats):
            plan = fold_plan(cfg, self.dataset_id, self.dataset.n_rows, repeat)
            for c in cfg.c_values:
                for m_index, m0 in enumerate(cfg.m_values):
                    for fold in range(cfg.folds):
                        methods = {
                            method for method in ("baseline", "proposed")
                            if (self.dataset_id, self.config_id, c, m_index, float(m0), fold, repeat, method)
                            not in done
                        }
                        if not methods:
                            continue
                        train_idx, test_idx = plan.train_test(fold)
                        tasks.append(CellTask(c, m_index, float(m0), fold, repeat, train_idx, test_idx, methods))
        return tasks

    def run(self) -> List[CellResult]:
        self.dataset = prepare_dataset(self.cfg)
        self.dataset_id = self.cfg.dataset_id or self.dataset.source_id
        tasks = self._tasks(self._resume())
        logger.info(
            f"[Runner] {self.dataset_id}: {self.dataset.n_rows}x{self.dataset.n_features}, "
            f"{len(tasks)} tasks on {self.jobs} worker(s), system={system_stats()}"
        )

        for task in tasks:
            self.task_queue.put(task)
        workers = [threading.Thread(target=self._worker, daemon=True) for _ in range(self.jobs)]
        for _ in workers:
            self.task_queue.put(None)
        for w in workers:
            w.start()
        for w in workers:
            w.join()

        failed = sum(1 for r in self.results.values() if not r.ok)
        logger.info(f"[Runner] Sweep done: {len(self.results)} cells, {failed} failed")
        return [self.results[k] for k in sorted(self.results)]


def run_experiment(cfg: ExperimentConfig, results_path: Optional[str] = None, jobs: int = 1) -> List[CellResult]:
    return SweepRunner(cfg, results_path, jobs).run()


def load_results(path: str) -> List[CellResult]:
    results = [CellResult.from_dict(r) for r in ResultsLog(path, record_key).load()]
    return sorted(results, key=lambda r: r.key)
