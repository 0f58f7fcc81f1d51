# SPDX-License-Identifier: Apache-2.0

import csv

import yaml

from fedsfr.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, SUMMARY_COLUMNS, main, sweep_settings
from fedsfr.exceptions import NonFiniteError
from fedsfr.federation import rounds
from fedsfr.metrics import COLUMNS, read_csv
from fedsfr.settings import RunConfig, load_config
from fedsfr.tensor.checkpoint import read_checkpoint


def test_run_writes_artifacts(tiny_yaml, tmp_path, caplog):
    assert main(["run", "--config", tiny_yaml]) == EXIT_OK
    assert "Convergence bound on the mean squared gradient norm" in caplog.text

    out = tmp_path / "run"
    log = read_csv(out / "metrics.csv")
    assert [m.t for m in log] == [0, 1, 2]
    encoder, decoder = read_checkpoint(out / "model.ckpt")
    assert encoder.output_shape == (16,)
    assert decoder.output_shape == (1, 8, 8)
    assert load_config(out / "config.resolved.yaml") == load_config(tiny_yaml)


def test_runs_are_byte_identical_per_seed(tiny_yaml, tmp_path):
    assert main(["run", "-c", tiny_yaml, "-o", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "-c", tiny_yaml, "-o", str(tmp_path / "b")]) == EXIT_OK
    assert main(["run", "-c", tiny_yaml, "-o", str(tmp_path / "c"), "--seed", "8"]) == EXIT_OK

    first = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert first == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert first != (tmp_path / "c" / "metrics.csv").read_bytes()


def test_invalid_config_exits_with_config_code(tmp_path, caplog):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"federation": {"k": 4, "k_m": 3, "k_o": 2}}))
    assert main(["run", "-c", str(path)]) == EXIT_CONFIG
    assert "federation.k_m + federation.k_o" in caplog.text


def test_empty_public_subset_exits_with_config_code(tmp_path, caplog):
    path = tmp_path / "no_public.yaml"
    path.write_text(yaml.safe_dump({"data": {"public_size": 0}, "federation": {"k_o": 1}}))
    assert main(["run", "-c", str(path), "-o", str(tmp_path / "run")]) == EXIT_CONFIG
    assert "data.public_size" in caplog.text
    assert not (tmp_path / "run").exists()


def test_missing_config_file_exits_with_config_code(tmp_path):
    assert main(["run", "-c", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_failed_round_keeps_completed_rounds(tiny_yaml, tmp_path, mocker, caplog):
    real_round = rounds.run_round

    def diverge_in_third_round(state, plan, clients, env):
        if plan.t == 2:
            raise NonFiniteError(f"client 0 step 3 of round {plan.t}")
        return real_round(state, plan, clients, env)

    mocker.patch("fedsfr.federation.rounds.run_round", side_effect=diverge_in_third_round)
    assert main(["run", "-c", tiny_yaml]) == EXIT_FAILURE
    assert "client 0 step 3 of round 2" in caplog.text

    metrics = tmp_path / "run" / "metrics.csv"
    assert metrics.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert [m.t for m in read_csv(metrics)] == [0, 1]
    assert not (tmp_path / "run" / "model.ckpt").exists()


def test_failure_before_any_round_leaves_header_only(tiny_yaml, tmp_path, mocker):
    mocker.patch("fedsfr.cli.Simulation.run", side_effect=NonFiniteError("client 0 step 0"))
    assert main(["run", "-c", tiny_yaml]) == EXIT_FAILURE
    assert (tmp_path / "run" / "metrics.csv").read_text() == ",".join(COLUMNS) + "\n"


def test_sweep_point_matches_single_run(tmp_path):
    settings = {
        "seed": 7,
        "data": {"size": 80, "client_size": 16, "public_size": 8, "test_size": 16},
        "federation": {"k": 4, "k_m": 2, "k_o": 1},
        "training": {"rounds": 2, "client_epochs": 1, "server_epochs": 1, "client_batch_size": 8},
        "sweep": {"seeds": [3]},
    }
    path = tmp_path / "sweep.yaml"
    path.write_text(yaml.safe_dump(settings))

    assert main(["sweep", "-c", str(path), "-o", str(tmp_path / "sweep"), "--axis", "seed"]) == EXIT_OK
    assert main(["run", "-c", str(path), "-o", str(tmp_path / "single"), "--seed", "3"]) == EXIT_OK

    swept = (tmp_path / "sweep" / "seed_3" / "metrics.csv").read_bytes()
    assert swept == (tmp_path / "single" / "metrics.csv").read_bytes()
    with open(tmp_path / "sweep" / "summary.csv", newline="") as file:
        rows = list(csv.reader(file))
    assert rows[0] == SUMMARY_COLUMNS
    assert [row[0] for row in rows[1:]] == ["seed_3"]
    assert float(rows[1][SUMMARY_COLUMNS.index("convergence_bound")]) > 0.0


def test_sweep_settings_axes():
    config = RunConfig()
    assert [name for name, _ in sweep_settings(config, "split")] == ["split_2_7", "split_3_3", "split_4_1"]
    assert [name for name, _ in sweep_settings(config, "algorithm")] == ["fedsfr", "dsgd"]
    eta = dict(sweep_settings(config, "eta_s0"))
    assert eta["eta_s0_0.1x"] == {"training": {"eta_s0": 0.1 * config.training.eta_c0}}


def test_invalid_sweep_point_exits_with_config_code(tiny_yaml, tmp_path):
    # the 2 + 7 split oversubscribes four clients
    assert main(["sweep", "-c", tiny_yaml, "--axis", "split"]) == EXIT_CONFIG


def test_check_command(tiny_yaml):
    assert main(["check", "-c", tiny_yaml, "--only", "memory", "--only", "aggregate"]) == EXIT_OK


def test_failing_check_exits_with_failure(tiny_yaml, mocker):
    mocker.patch("fedsfr.checks.allocate_budget", return_value=[0, 0, 0, 0])
    assert main(["check", "-c", tiny_yaml, "--only", "memory"]) == EXIT_FAILURE
