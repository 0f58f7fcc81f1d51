# SPDX-License-Identifier: Apache-2.0

"""AWGN channel"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from fedsfr.tensor import Tensor


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel with unit signal power, so SNR = 1 / sigma2.

    snr_db = inf is the noiseless channel.
    """

    snr_db: float

    @property
    def sigma2(self) -> float:
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return float(10.0 ** (-self.snr_db / 10.0))

    @classmethod
    def from_sigma2(cls, sigma2: float) -> "ChannelConfig":
        if sigma2 < 0:
            raise ValueError(f"Noise variance must be non-negative, got {sigma2}")
        if sigma2 == 0:
            return cls(snr_db=math.inf)
        return cls(snr_db=-10.0 * math.log10(sigma2))


def channel_noise(shape: Tuple[int, ...], cfg: ChannelConfig, rng: np.random.Generator) -> Tensor:
    """Draws n ~ N(0, sigma2 I); the noiseless channel draws nothing"""
    sigma2 = cfg.sigma2
    if sigma2 == 0.0:
        return np.zeros(shape)
    return rng.normal(0.0, math.sqrt(sigma2), size=shape)


def apply_awgn(signal: Tensor, cfg: ChannelConfig, rng: np.random.Generator) -> Tensor:
    return signal + channel_noise(signal.shape, cfg, rng)
