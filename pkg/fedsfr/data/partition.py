# SPDX-License-Identifier: Apache-2.0

"""Client partitioning and mini-batch iteration"""

from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np
import numpy.typing as npt

from fedsfr.data.dataset import ImageDataset
from fedsfr.exceptions import BudgetError, DegenerateInputError
from fedsfr.logging import logger

Positions = npt.NDArray[np.int64]


@dataclass(frozen=True)
class PartitionSpec:
    k: int
    client_size: int
    public_size: int
    test_size: int = 0
    strategy: str = "iid"

    def validate(self, available: int) -> None:
        if self.strategy != "iid":
            raise BudgetError(f"Unsupported partition strategy {self.strategy!r}")
        if self.k < 1 or self.client_size < 1:
            raise BudgetError(f"Need at least one client with data, got K = {self.k}, |D_k| = {self.client_size}")
        if not 0 <= self.public_size <= self.client_size:
            raise BudgetError(f"|P_k| = {self.public_size} must lie in [0, |D_k| = {self.client_size}]")
        needed = self.k * self.client_size + self.test_size
        if needed > available:
            raise BudgetError(f"Partition needs {needed} images, dataset has {available}")


@dataclass(frozen=True)
class ClientShard:
    """A client's local dataset D_k, its public subset P_k (positions within D_k) and weight p_k."""

    client_id: int
    data: ImageDataset
    public: Positions
    weight: float

    @property
    def public_data(self) -> ImageDataset:
        return self.data.subset(self.public)


def partition(dataset: ImageDataset, spec: PartitionSpec, rng: np.random.Generator) -> Tuple[List[ClientShard], ImageDataset]:
    """Draws disjoint equal-size client datasets uniformly, each with a public subset, plus a test split

    Args:
        dataset (ImageDataset): Source images
        spec (PartitionSpec): Sizes
        rng (np.random.Generator): Partition stream

    Returns:
        tuple: Client shards in id order and the global test split
    """
    spec.validate(len(dataset))
    order = rng.permutation(len(dataset))
    consumed = spec.k * spec.client_size
    shards = []
    for k in range(spec.k):
        positions = np.sort(order[k * spec.client_size : (k + 1) * spec.client_size])
        public = np.sort(rng.choice(spec.client_size, size=spec.public_size, replace=False)).astype(np.int64)
        shards.append(
            ClientShard(
                client_id=k,
                data=dataset.subset(positions, split="train"),
                public=public,
                weight=spec.client_size / consumed,
            )
        )
    test = dataset.subset(np.sort(order[consumed : consumed + spec.test_size]), split="test")
    logger.debug("Partitioned %d images into %d clients of %d and a test split of %d", len(dataset), spec.k, spec.client_size, len(test))
    return shards, test


def minibatches(size: int, batch_size: int, rng: np.random.Generator, epochs: int = 1) -> Iterator[Positions]:
    """Yields index batches: one fresh permutation per epoch, cut into consecutive chunks, short tail kept"""
    if batch_size < 1:
        raise ValueError(f"Batch size must be at least 1, got {batch_size}")
    if size <= 0:
        raise DegenerateInputError("Cannot draw mini-batches from an empty dataset")
    for _ in range(epochs):
        order = rng.permutation(size).astype(np.int64)
        for start in range(0, size, batch_size):
            yield order[start : start + batch_size]
