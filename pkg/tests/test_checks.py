# SPDX-License-Identifier: Apache-2.0

import pytest

from fedsfr import checks
from fedsfr.checks import SUITES, fedavg_config, run_checks


@pytest.mark.parametrize("name", ["grad", "topk", "memory", "aggregate", "sampling", "channel"])
def test_suite_passes(name, tiny_config):
    result = SUITES[name](tiny_config)
    assert result.passed, result.detail
    assert result.name == name


def test_fedavg_reduction_is_bitwise(tiny_config):
    result = checks.check_fedavg(tiny_config)
    assert result.passed, result.detail
    assert "20 rounds" in result.detail


def test_fedavg_config_switches_off_compression_and_fr(tiny_config):
    reduced = fedavg_config(tiny_config, rounds=5)
    assert reduced.federation.k_m == tiny_config.federation.k
    assert reduced.federation.k_o == 0
    assert reduced.federation.s_m_ratio == 1.0
    assert reduced.training.server_epochs == 0
    assert reduced.training.rounds == 5


def test_memory_check_detects_budget_bug(tiny_config, mocker):
    allocate = checks.allocate_budget

    def off_by_one(boundaries, total):
        budgets = allocate(boundaries, total)
        budgets[0] = min(budgets[0] + 1, boundaries[0][1])
        return budgets

    mocker.patch("fedsfr.checks.allocate_budget", side_effect=off_by_one)
    result = checks.check_memory(tiny_config)
    assert not result.passed
    assert "entries for S" in result.detail


def test_topk_detects_wrong_tie_break(tiny_config, mocker):
    mocker.patch("fedsfr.compression.sparse.selection_order", side_effect=lambda v: (-abs(v)).argsort(kind="stable"))
    assert not checks.check_topk(tiny_config, vectors=200).passed


def test_run_checks_selects_suites(tiny_config, caplog):
    results = run_checks(tiny_config, ["aggregate", "channel"])
    assert [r.name for r in results] == ["aggregate", "channel"]
    assert "PASS aggregate" in caplog.text
