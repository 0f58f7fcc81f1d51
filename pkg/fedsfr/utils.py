# SPDX-License-Identifier: Apache-2.0

from copy import deepcopy
from typing import Any, Dict

import numpy as np
from deepmerge import always_merger

from fedsfr.exceptions import NonFiniteError

# Purpose ids for generator streams; new purposes must be appended, never renumbered.
STREAMS = {
    "init": 0,
    "data": 1,
    "partition": 2,
    "sampling": 3,
    "client": 4,
    "server": 5,
    "evaluation": 6,
    "check": 7,
    "gradnorm": 8,
}


def deep_merge(*dicts: Dict[Any, Any]) -> Dict[Any, Any]:
    """Merges dictionaries, later ones winning

    Returns:
        dict: Merged dictionary
    """
    merged: Dict[Any, Any] = {}
    for d in dicts:
        tmp = deepcopy(d)
        merged = always_merger.merge(merged, tmp)
    return merged


def stream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Derives an independent generator for a purpose and integer keys

    Streams depend only on (seed, purpose, keys), never on call order, so work
    scheduled on different threads draws exactly the same numbers.

    Args:
        seed (int): Run seed
        purpose (str): One of STREAMS
        keys (int): Extra coordinates such as round index and client id

    Returns:
        np.random.Generator: Seeded PCG64 generator
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[purpose], *keys))
    return np.random.default_rng(sequence)


def ensure_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Non-finite value produced by {what}")
    return values
