# SPDX-License-Identifier: Apache-2.0

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import numpy.typing as npt

from fedsfr.compression import ErrorMemory
from fedsfr.data import ClientShard, ImageDataset
from fedsfr.exceptions import BudgetError
from fedsfr.jscc import JsccModel
from fedsfr.tensor import FlatParams, Tensor


@dataclass
class ClientState:
    """A client: its data shard D_k, public subset P_k, weight p_k and error memory m_k."""

    shard: ClientShard
    memory: ErrorMemory

    @property
    def id(self) -> int:
        return self.shard.client_id

    @property
    def data(self) -> ImageDataset:
        return self.shard.data

    @property
    def weight(self) -> float:
        return self.shard.weight


@dataclass(frozen=True)
class RoundPlan:
    t: int
    a_m: Tuple[int, ...]
    a_o: Tuple[int, ...]
    s_m: int
    s_o: int
    eta_c: float
    eta_s: float

    def __post_init__(self) -> None:
        if set(self.a_m) & set(self.a_o):
            raise BudgetError(f"Round {self.t}: clients {sorted(set(self.a_m) & set(self.a_o))} in both groups")
        if self.a_o and self.s_o >= self.s_m:
            raise BudgetError(f"Round {self.t}: S_o = {self.s_o} must be below S_m = {self.s_m}")

    @property
    def participants(self) -> Tuple[int, ...]:
        return tuple(sorted(self.a_m + self.a_o))


@dataclass(frozen=True)
class FeatureSet:
    """Encoder outputs Y_k sent by an A_o client; source_ids are kept for audit only."""

    owner: int
    vectors: Tensor
    source_ids: npt.NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass
class GlobalState:
    model: JsccModel
    t: int = 0

    @property
    def w(self) -> FlatParams:
        return self.model.params
