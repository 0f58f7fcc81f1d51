# SPDX-License-Identifier: Apache-2.0

from fedsfr.federation.client import LocalResult, local_update, make_feature_payload, make_model_payload
from fedsfr.federation.rounds import RoundEnvironment, Simulation, build_dataset, run_round, run_training
from fedsfr.federation.sampling import sample_round
from fedsfr.federation.schedule import LearningRates, lr_schedule
from fedsfr.federation.server import ServerResult, aggregate, best_reference_update, server_fr_update
from fedsfr.federation.state import ClientState, FeatureSet, GlobalState, RoundPlan

__all__ = [
    "ClientState",
    "FeatureSet",
    "GlobalState",
    "LearningRates",
    "LocalResult",
    "RoundEnvironment",
    "RoundPlan",
    "ServerResult",
    "Simulation",
    "aggregate",
    "best_reference_update",
    "build_dataset",
    "local_update",
    "lr_schedule",
    "make_feature_payload",
    "make_model_payload",
    "run_round",
    "run_training",
    "sample_round",
    "server_fr_update",
]
