# SPDX-License-Identifier: Apache-2.0

"""Per-round metrics, their CSV form and run summaries"""

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

from fedsfr.exceptions import DegenerateInputError, FormatError


@dataclass(frozen=True)
class RoundMetrics:
    t: int
    eta_c: float
    eta_s: float
    train_lc: float
    test_lc_pre_fr: float
    test_lc_post_fr: float
    test_psnr_pre_fr: float
    test_psnr_post_fr: float
    fr_improved: bool
    epsilon_hat: float
    cos_ab: float
    mean_mem_sq: float
    lemma2_bound: float
    grad_norm_sq: float
    wall_ms: float
    best_ref_dist: float


COLUMNS = [f.name for f in fields(RoundMetrics)]


@dataclass
class MetricsLog:
    rounds: List[RoundMetrics] = field(default_factory=list)

    def append(self, metrics: RoundMetrics) -> None:
        if self.rounds and metrics.t <= self.rounds[-1].t:
            raise ValueError(f"Round {metrics.t} logged after round {self.rounds[-1].t}")
        self.rounds.append(metrics)

    def __len__(self) -> int:
        return len(self.rounds)

    def __iter__(self) -> Iterator[RoundMetrics]:
        return iter(self.rounds)

    def column(self, name: str) -> List[Any]:
        return [getattr(r, name) for r in self.rounds]


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # repr is the shortest string that parses back to the same double; inf stays "inf"
        return repr(float(value))
    return str(value)


def _parse(name: str, text: str) -> Any:
    if name == "t":
        return int(text)
    if name == "fr_improved":
        if text not in ("true", "false"):
            raise FormatError(f"Bad boolean {text!r} in column fr_improved")
        return text == "true"
    return float(text)


def write_csv(log: MetricsLog, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(COLUMNS)
        for metrics in log:
            writer.writerow([_format(value) for value in astuple(metrics)])


def read_csv(path: Union[str, Path]) -> MetricsLog:
    with open(path, newline="") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header != COLUMNS:
            raise FormatError(f"Unexpected metrics header {header}")
        log = MetricsLog()
        for row in reader:
            if len(row) != len(COLUMNS):
                raise FormatError(f"Metrics row has {len(row)} fields, expected {len(COLUMNS)}")
            log.append(RoundMetrics(*(_parse(name, text) for name, text in zip(COLUMNS, row))))
    return log


def improvement_ratio(log: MetricsLog, window: Optional[int] = None) -> float:
    """Fraction of rounds (the last `window` of them, if given) in which FR lowered the test loss"""
    if not len(log):
        raise DegenerateInputError("Improvement ratio of an empty log")
    rounds = log.rounds[-window:] if window else log.rounds
    return sum(1 for r in rounds if r.fr_improved) / len(rounds)


def lemma2_margin(log: MetricsLog) -> float:
    """Time-averaged mean ||m_k||^2 over the final error-memory bound; at most 1 when the bound holds"""
    mean_memory = float(np.mean(log.column("mean_mem_sq")))
    bound = log.rounds[-1].lemma2_bound
    if bound == 0.0:
        return 0.0 if mean_memory == 0.0 else math.inf
    return mean_memory / bound


def summarize(log: MetricsLog) -> Dict[str, float]:
    if not len(log):
        raise DegenerateInputError("Cannot summarize an empty log")
    last = log.rounds[-1]
    return {
        "rounds": float(len(log)),
        "final_psnr": last.test_psnr_post_fr,
        "final_test_lc": last.test_lc_post_fr,
        "improvement_ratio": improvement_ratio(log),
        "median_epsilon_hat": float(np.median(log.column("epsilon_hat"))),
        "lemma2_margin": lemma2_margin(log),
        "eta_condition_fraction": sum(1 for r in log if r.eta_s < r.eta_c) / len(log),
        "mean_grad_norm_sq": float(np.mean(log.column("grad_norm_sq"))),
    }
