"""
GRANULA - Command-Line Entry Point

Granulation-degranulation toolkit: FCM granulation, per-cluster
fuzzification factors tuned by PSO, cross-validated reconstruction sweeps.

Usage:
    python main.py gen-synthetic --seed 1 --out s.csv
    python main.py fit-fcm  --data X.csv --clusters 3 --m 2.0 --seed 7 --out baseline.json
    python main.py refine   --data X.csv --clusters 3 --m0 2.0 --seed 7 --out model.json
    python main.py evaluate --model model.json --data X.csv
    python main.py sweep    --config cfg.json --out results.ndjson
    python main.py report   --in results.ndjson --format markdown
    python main.py plot-data --model model.json --kind pso_history --out h.tsv

Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

from clustering.fcm import FcmConfig
from core.config import load_config, load_mapping, merge, section
from core.errors import ExitCode, UsageError, exit_code_for
from core.seeding import default_seed, derive_seed
from core.storage import atomic_write_text, dump_json, read_json, write_json
from data.catalog import dataset_ids, load_dataset
from data.dataset import (
    Dataset,
    NormalizationParams,
    SyntheticSpec,
    apply_zscore,
    gen_synthetic,
    normalize_zscore,
)
from experiment.plot_data import KINDS, emit_plot_data
from experiment.report import FORMATS, aggregate, emit_report, render_report
from experiment.runner import ExperimentConfig, load_results, run_experiment
from optim.pso import PsoConfig
from pipeline.refine import fit_baseline, model_from_dict, reconstruct_with, train_refined

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger("granula.main")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().strip()}")


def configure_logging(settings: Dict[str, Any], level: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    log_file = settings.get("file")
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=(level or settings.get("level") or "INFO").upper(),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def _data_flags(p: argparse.ArgumentParser, required: bool = True, normalize: bool = True) -> None:
    p.add_argument("--data", required=required,
                   help=f"CSV path or 'synthetic' (catalog profiles: {', '.join(dataset_ids())})")
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=None,
                   help="first CSV row is a header (default: catalog profile, else no)")
    p.add_argument("--drop-last-column", action=argparse.BooleanOptionalAction, default=None,
                   help="drop a trailing class-label column")
    p.add_argument("--drop-first-columns", type=int, default=None,
                   help="number of leading id/class columns to drop")
    if normalize:
        p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                       help="z-score the data before fitting (default: on)")


def _pso_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pso-particles", type=int, default=None)
    p.add_argument("--pso-iters", type=int, default=None)


def build_parser() -> CliParser:
    parser = CliParser(prog="granula", description="Fuzzy granulation-degranulation toolkit")
    parser.add_argument("--config", default=None, help="application config (default: config.yaml)")
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliParser)
    sub.required = True

    p = sub.add_parser("gen-synthetic", help="write the nine-blob synthetic dataset")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-fcm", help="fit the FCM baseline with one fuzzifier")
    _data_flags(p)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("refine", help="FCM at m0, then PSO over per-cluster fuzzifiers")
    _data_flags(p)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--m0", type=float, default=2.0)
    _pso_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="threads for fitness evaluation")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="reconstruction error of a saved model on data")
    p.add_argument("--model", required=True)
    _data_flags(p, normalize=False)
    p.add_argument("--out", default=None, help="scores JSON (default: stdout)")
    p.add_argument("--reconstruction", default=None,
                   help="also write the reconstructed rows and error as JSON")

    p = sub.add_parser("sweep", help="run the cross-validated experiment grid")
    p.add_argument("--config", dest="experiment", default=None, help="experiment config (JSON or YAML)")
    _data_flags(p, required=False)
    p.add_argument("--clusters", type=int, nargs="+", default=None)
    p.add_argument("--m0", type=float, nargs="+", default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    _pso_flags(p)
    p.add_argument("--jobs", type=int, default=None, help="parallel cells; 0 = one per physical core")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="NDJSON results log (appended, resumable)")

    p = sub.add_parser("report", help="aggregate a results log")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--format", default="markdown", choices=list(FORMATS))
    p.add_argument("--out", default=None, help="report file (default: stdout)")

    p = sub.add_parser("plot-data", help="emit tab-separated plot series")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", default=None)
    src.add_argument("--in", dest="inp", default=None)
    p.add_argument("--kind", required=True, choices=list(KINDS))
    _data_flags(p, required=False, normalize=False)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--out", required=True)
    return parser


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------

def _load_data(args: argparse.Namespace, config: Dict[str, Any]) -> Dataset:
    return load_dataset(
        args.data,
        has_header=getattr(args, "header", None),
        drop_last_column=getattr(args, "drop_last_column", None),
        drop_first_columns=getattr(args, "drop_first_columns", None),
        synthetic=SyntheticSpec.from_dict(section(config, "synthetic")),
    )


def _training_data(args: argparse.Namespace, config: Dict[str, Any]) -> Tuple[Dataset, Optional[NormalizationParams]]:
    dataset = _load_data(args, config)
    if not args.normalize:
        return dataset, None
    return normalize_zscore(dataset)


def _fcm_config(config: Dict[str, Any], c: int, m: float, seed: int) -> FcmConfig:
    return FcmConfig.from_dict(merge(section(config, "fcm"), {"c": c, "m": m, "seed": seed}))


def _save_model(path: str, model: Any, params: Optional[NormalizationParams]) -> None:
    data = model.to_dict()
    data["normalization"] = params.to_dict() if params is not None else None
    write_json(path, data)
    logger.info(f"[CLI] wrote {model.kind} model to {path}")


def _load_model(path: str) -> Tuple[Any, Optional[NormalizationParams]]:
    data = read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"{path} is not a model file")
    params = data.get("normalization")
    return model_from_dict(data), NormalizationParams.from_dict(params) if params else None


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_gen_synthetic(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    spec = SyntheticSpec.from_dict(section(config, "synthetic"))
    if args.seed is not None or "seed" not in section(config, "synthetic"):
        spec = replace(spec, seed=default_seed(args.seed))
    dataset = gen_synthetic(spec)
    atomic_write_text(args.out, dataset.to_csv_text(header=False))
    logger.info(f"[CLI] wrote {dataset.n_rows}x{dataset.n_features} synthetic dataset to {args.out}")
    return ExitCode.OK


def cmd_fit_fcm(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    dataset, params = _training_data(args, config)
    seed = default_seed(args.seed)
    model = fit_baseline(dataset, args.clusters, args.m, _fcm_config(config, args.clusters, args.m, seed))
    _save_model(args.out, model, params)
    return ExitCode.OK


def cmd_refine(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    dataset, params = _training_data(args, config)
    seed = default_seed(args.seed)
    fcm_cfg = _fcm_config(config, args.clusters, args.m0, seed)
    pso_cfg = PsoConfig.from_dict(merge(section(config, "pso"), {
        "particles": args.pso_particles,
        "max_iter": args.pso_iters,
        "workers": args.jobs,
        "seed": derive_seed(seed, "pso"),
    }))
    model = train_refined(dataset, args.clusters, args.m0, fcm_cfg, pso_cfg)
    _save_model(args.out, model, params)
    return ExitCode.OK


def cmd_evaluate(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    model, params = _load_model(args.model)
    dataset = _load_data(args, config)
    if params is not None:
        dataset = apply_zscore(dataset, params)
    result = reconstruct_with(model, dataset)
    if args.reconstruction:
        write_json(args.reconstruction, result.to_dict())
    scores = {
        "kind": model.kind,
        "n_rows": dataset.n_rows,
        "reconstruction_error": result.error,
        "train_error": model.train_error,
    }
    _emit(dump_json(scores), args.out)
    return ExitCode.OK


def experiment_config(args: argparse.Namespace, config: Dict[str, Any]) -> ExperimentConfig:
    """config.yaml defaults < experiment file < flags."""
    merged = merge(section(config, "experiment"), {
        "fcm": section(config, "fcm"),
        "pso": section(config, "pso"),
        "synthetic": section(config, "synthetic"),
    })
    if args.experiment:
        merged = merge(merged, load_mapping(args.experiment))
    merged = merge(merged, {
        "dataset": args.data,
        "has_header": args.header,
        "drop_last_column": args.drop_last_column,
        "drop_first_columns": args.drop_first_columns,
        "c_values": args.clusters,
        "m_values": args.m0,
        "folds": args.folds,
        "repeats": args.repeats,
        "pso": {"particles": args.pso_particles, "max_iter": args.pso_iters},
    })
    if not args.normalize:
        merged["normalize"] = False
    if args.seed is not None or "master_seed" not in merged:
        merged["master_seed"] = default_seed(args.seed)
    return ExperimentConfig.from_dict(merged)


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    cfg = experiment_config(args, config)
    storage = section(config, "storage")
    out = args.out or storage.get("results_log") or "results.ndjson"
    jobs = args.jobs if args.jobs is not None else int(section(config, "experiment").get("jobs", 1))
    results = run_experiment(cfg, out, jobs=jobs)
    failed = sum(1 for r in results if not r.ok)
    logger.info(f"[CLI] sweep finished: {len(results)} cells ({failed} failed) in {out}")
    return ExitCode.OK


def cmd_report(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    table = aggregate(load_results(args.inp))
    if args.out:
        emit_report(table, args.format, args.out)
    else:
        sys.stdout.write(render_report(table, args.format))
    return ExitCode.OK


def cmd_plot_data(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    options: Dict[str, Any] = {}
    if args.inp:
        source: Any = load_results(args.inp)
    else:
        source, params = _load_model(args.model)
        if args.kind == "membership_grid":
            options["grid_size"] = args.grid_size
            if args.data:
                data = _load_data(args, config)
                options["data"] = apply_zscore(data, params) if params is not None else data
    emit_plot_data(source, args.kind, args.out, **options)
    return ExitCode.OK


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "fit-fcm": cmd_fit_fcm,
    "refine": cmd_refine,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "plot-data": cmd_plot_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return ExitCode.USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        config = load_config(args.config)
        configure_logging(section(config, "logging"), args.log_level)
        logger.info(f"[CLI] {args.command}")
        return COMMANDS[args.command](args, config)
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"[CLI] {args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
