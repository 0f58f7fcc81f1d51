# SPDX-License-Identifier: Apache-2.0

from typing import Any, Dict

import numpy as np
import yaml
import pytest

from fedsfr.jscc import JsccModel, build_jscc
from fedsfr.settings import RunConfig


def tiny_settings(out_dir: str) -> Dict[str, Any]:
    return {
        "seed": 7,
        "data": {"size": 80, "client_size": 16, "public_size": 8, "test_size": 16},
        "federation": {"k": 4, "k_m": 2, "k_o": 1},
        "training": {
            "rounds": 3,
            "client_epochs": 1,
            "server_epochs": 1,
            "client_batch_size": 8,
            "server_batch_size": 4,
        },
        "evaluation": {"grad_norm_budget": 8},
        "output": {"dir": out_dir},
    }


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("FEDSFR_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("FEDSFR_THREADS", raising=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def desk_model(rng) -> JsccModel:
    return build_jscc((1, 8, 8), (1, 8, 4), rng)


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    return RunConfig.model_validate(tiny_settings(str(tmp_path / "run")))


@pytest.fixture
def tiny_yaml(tmp_path) -> str:
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_settings(str(tmp_path / "run"))))
    return str(path)
