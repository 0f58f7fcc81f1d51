# SPDX-License-Identifier: Apache-2.0

"""Learning-rate schedules"""

import math
from typing import NamedTuple

from fedsfr.settings import TrainingSettings


class LearningRates(NamedTuple):
    eta_c: float
    eta_s: float

    @property
    def server_below_client(self) -> bool:
        return self.eta_s < self.eta_c


def lr_schedule(t: int, training: TrainingSettings) -> LearningRates:
    """Client and server learning rates for round t

    staircase: eta(t) = eta(0) * decay^floor(t / decay_every)
    theory:    eta_c = alpha(t) / sqrt(T), eta_s = alpha(t) / T^(3/4), alpha(t) = alpha0 * decay^floor(t / decay_every)
    """
    if t < 0:
        raise ValueError(f"Round index must be non-negative, got {t}")
    factor = training.decay ** (t // training.decay_every)
    if training.schedule == "staircase":
        return LearningRates(training.eta_c0 * factor, training.eta_s0 * factor)
    horizon = training.theory_horizon or training.rounds
    alpha = training.alpha0 * factor
    return LearningRates(alpha / math.sqrt(horizon), alpha / horizon**0.75)
