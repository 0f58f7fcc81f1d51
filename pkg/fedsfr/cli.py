# SPDX-License-Identifier: Apache-2.0

"""Main application"""

import csv
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml
from pydantic import ValidationError

from fedsfr.arguments import parse_args
from fedsfr.checks import run_checks
from fedsfr.exceptions import FedSFRError
from fedsfr.federation import Simulation
from fedsfr.logging import logger, set_verbosity
from fedsfr.metrics import MetricsLog, summarize, write_csv
from fedsfr.settings import RunConfig, dump_config, load_config
from fedsfr.tensor.checkpoint import write_checkpoint
from fedsfr.utils import deep_merge

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "model.ckpt"
RESOLVED_CONFIG_FILE = "config.resolved.yaml"
SUMMARY_FILE = "summary.csv"
SUMMARY_COLUMNS = [
    "setting",
    "final_psnr",
    "improvement_ratio",
    "median_epsilon_hat",
    "lemma2_margin",
    "convergence_bound",
]


def train(config: RunConfig) -> Tuple[MetricsLog, Dict[str, float]]:
    """Runs one training and writes its artifacts under config.output.dir

    The metrics CSV is written even when a round fails, holding the rounds completed so far.
    """
    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / RESOLVED_CONFIG_FILE)

    sim = Simulation.from_config(config, dump_dir=out / "dumps" if config.output.dump_updates else None)
    log = MetricsLog()
    try:
        sim.run(log)
    finally:
        write_csv(log, out / METRICS_FILE)
    write_checkpoint(out / CHECKPOINT_FILE, [sim.state.model.encoder, sim.state.model.decoder])

    summary = summarize(log)
    summary["convergence_bound"] = sim.convergence_bound(log)
    logger.info(
        "Final PSNR %.3f dB, improvement ratio %.3f, median epsilon_hat %.4f, memory-bound margin %.3f",
        summary["final_psnr"],
        summary["improvement_ratio"],
        summary["median_epsilon_hat"],
        summary["lemma2_margin"],
    )
    logger.info("Convergence bound on the mean squared gradient norm: %.4g", summary["convergence_bound"])
    if summary["lemma2_margin"] > 1.0:
        logger.warning("Time-averaged memory norm exceeds the error-memory bound by %.2fx", summary["lemma2_margin"])
    return log, summary


def cmd_run(config: RunConfig) -> int:
    train(config)
    return EXIT_OK


def sweep_settings(config: RunConfig, axis: str) -> List[Tuple[str, Dict[str, Any]]]:
    """Named config overrides, one per point on the sweep axis"""
    sweep = config.sweep
    if axis == "eta_s0":
        return [
            (f"eta_s0_{factor:g}x", {"training": {"eta_s0": factor * config.training.eta_c0}})
            for factor in sweep.eta_s0_factors
        ]
    if axis == "split":
        return [(f"split_{k_m}_{k_o}", {"federation": {"k_m": k_m, "k_o": k_o}}) for k_m, k_o in sweep.splits]
    if axis == "algorithm":
        return [(name, {"federation": {"algorithm": name}}) for name in ("fedsfr", "dsgd")]
    if axis == "seed":
        return [(f"seed_{seed}", {"seed": seed}) for seed in sweep.seeds]
    raise ValueError(f"Unknown sweep axis {axis!r}")


def cmd_sweep(config: RunConfig, axis: str) -> int:
    root = Path(config.output.dir)
    rows = []
    for name, overrides in sweep_settings(config, axis):
        overrides = deep_merge(overrides, {"output": {"dir": str(root / name)}})
        point = RunConfig.model_validate(deep_merge(config.model_dump(), overrides))
        logger.info("Sweep %s: %s", axis, name)
        _, summary = train(point)
        rows.append([name] + [repr(float(summary[column])) for column in SUMMARY_COLUMNS[1:]])

    root.mkdir(parents=True, exist_ok=True)
    with open(root / SUMMARY_FILE, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
    return EXIT_OK


def cmd_check(config: RunConfig, only: Optional[Sequence[str]] = None) -> int:
    results = run_checks(config, only)
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error("Failed checks: %s", ", ".join(failed))
        return EXIT_FAILURE
    logger.info("All %d checks passed", len(results))
    return EXIT_OK


def _overrides(args: Any) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = {"dir": args.out}
    if args.threads is not None:
        overrides["threads"] = args.threads
    return overrides


def _report(error: ValidationError) -> None:
    for detail in error.errors():
        location = ".".join(str(part) for part in detail["loc"]) or "config"
        logger.error("Invalid config: %s: %s", location, detail["msg"])


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else list(argv))
    set_verbosity(args.verbosity)

    try:
        config = load_config(args.config, _overrides(args))
    except ValidationError as e:
        _report(e)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as e:
        logger.error("Cannot read config: %s", e)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            return cmd_run(config)
        if args.command == "sweep":
            return cmd_sweep(config, args.axis)
        return cmd_check(config, args.only)
    except ValidationError as e:
        _report(e)
        return EXIT_CONFIG
    except FedSFRError as e:
        logger.error("Error: %s", e)
        return EXIT_FAILURE
