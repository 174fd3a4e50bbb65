"""CLI contract: exit codes, artifacts, overrides, determinism."""

from __future__ import annotations

import json

import pytest

from mlsim.cli import main


@pytest.fixture()
def epidemic_config(tmp_path):
    path = tmp_path / "epi.json"
    path.write_text(json.dumps({
        "scenario": "epidemic",
        "steps": 30,
        "epidemic": {
            "beta": 0.004,
            "cities": [{"population": 250}, {"population": 250}, {"population": 250}],
        },
    }))
    return path


@pytest.fixture()
def pollution_config(tmp_path):
    path = tmp_path / "pol.json"
    path.write_text(json.dumps({
        "scenario": "pollution",
        "steps": 40,
        "pollution": {
            "grid": {"width": 12, "height": 12},
            "fleet": {"petrol": 30, "lpg": 5, "electric": 0},
        },
    }))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def test_happy_path_writes_run_csv(tmp_path, epidemic_config, capsys):
    out = tmp_path / "r"
    assert run_cli("epidemic", "--config", epidemic_config,
                   "--seed", 42, "--out", out) == 0
    assert (out / "run.csv").exists()
    assert "run.csv" in capsys.readouterr().out


def test_unknown_subcommand_exits_2(tmp_path, epidemic_config):
    with pytest.raises(SystemExit) as err:
        run_cli("weather", "--config", epidemic_config, "--out", tmp_path)
    assert err.value.code == 2


def test_missing_out_dir_exits_2(epidemic_config, monkeypatch):
    monkeypatch.delenv("MLSIM_OUT", raising=False)
    with pytest.raises(SystemExit) as err:
        run_cli("epidemic", "--config", epidemic_config)
    assert err.value.code == 2


def test_env_var_out_fallback(tmp_path, epidemic_config, monkeypatch):
    out = tmp_path / "from_env"
    monkeypatch.setenv("MLSIM_OUT", str(out))
    assert run_cli("epidemic", "--config", epidemic_config) == 0
    assert (out / "run.csv").exists()


def test_scenario_mismatch_exits_2(tmp_path, pollution_config):
    with pytest.raises(SystemExit) as err:
        run_cli("epidemic", "--config", pollution_config, "--out", tmp_path)
    assert err.value.code == 2


def test_bad_config_exits_1_with_component(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": "epidemic",
                               "epidemic": {"cities": [{}], "beta": -1}}))
    assert run_cli("epidemic", "--config", bad, "--out", tmp_path / "o") == 1
    err = capsys.readouterr().err
    assert err.startswith("error [config]")
    assert "beta" in err


def test_missing_config_file_exits_1(tmp_path, capsys):
    assert run_cli("epidemic", "--config", tmp_path / "nope.json",
                   "--out", tmp_path / "o") == 1
    assert "error [config]" in capsys.readouterr().err


def test_workers_do_not_change_bytes(tmp_path, epidemic_config):
    outs = {}
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        assert run_cli("epidemic", "--config", epidemic_config,
                       "--seed", 7, "--workers", workers, "--out", out) == 0
        outs[workers] = (out / "run.csv").read_bytes()
    assert outs[1] == outs[8]


def test_seed_override_changes_output(tmp_path, epidemic_config):
    outs = {}
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        run_cli("epidemic", "--config", epidemic_config,
                "--seed", seed, "--out", out)
        outs[seed] = (out / "run.csv").read_bytes()
    assert outs[1] != outs[2]


def test_steps_override(tmp_path, epidemic_config):
    out = tmp_path / "short"
    run_cli("epidemic", "--config", epidemic_config,
            "--steps", 5, "--out", out)
    lines = (out / "run.csv").read_text().splitlines()
    assert len(lines) == 1 + 6 * 3  # header + (steps+1) * cities


def test_plots_flag_emits_svgs(tmp_path, epidemic_config):
    out = tmp_path / "p"
    assert run_cli("epidemic", "--config", epidemic_config,
                   "--plots", "--out", out) == 0
    svgs = list(out.glob("*.svg"))
    assert len(svgs) >= 4


def test_exchange_files_mode_matches_in_process(tmp_path, epidemic_config):
    plain = tmp_path / "plain"
    filed = tmp_path / "filed"
    run_cli("epidemic", "--config", epidemic_config, "--seed", 5, "--out", plain)
    run_cli("epidemic", "--config", epidemic_config, "--seed", 5,
            "--exchange-files", "--out", filed)
    assert (plain / "run.csv").read_bytes() == (filed / "run.csv").read_bytes()
    exchange_files = list((filed / "exchange").glob("exchange_*.json"))
    assert len(exchange_files) == 30 * 3  # one per (city macro node, step)


def test_pollution_subcommand(tmp_path, pollution_config):
    out = tmp_path / "pol"
    assert run_cli("pollution", "--config", pollution_config,
                   "--plots", "--out", out) == 0
    header = (out / "run.csv").read_text().splitlines()[0]
    assert header == "step,node_id,total_pollution,P,L,E"
    assert (out / "pollution_total.svg").exists()
    assert (out / "fleet_composition.svg").exists()


def test_grid_dumps_flag(tmp_path, pollution_config):
    out = tmp_path / "dumps"
    assert run_cli("pollution", "--config", pollution_config,
                   "--grid-dumps", 20, "--out", out) == 0
    names = sorted(p.name for p in (out / "grids").glob("grid_*.csv"))
    assert names == ["grid_0.csv", "grid_20.csv", "grid_40.csv"]


def test_grid_dumps_rejected_for_epidemic(tmp_path, epidemic_config):
    with pytest.raises(SystemExit) as err:
        run_cli("epidemic", "--config", epidemic_config,
                "--grid-dumps", 5, "--out", tmp_path)
    assert err.value.code == 2


def test_exchange_mode_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "scenario": "epidemic", "steps": 10, "exchange_mode": "json_files",
        "epidemic": {"beta": 0.004, "cities": [{"population": 100}] * 2},
    }))
    out = tmp_path / "out"
    assert run_cli("epidemic", "--config", cfg, "--out", out) == 0
    assert len(list((out / "exchange").glob("exchange_*.json"))) == 10 * 2
