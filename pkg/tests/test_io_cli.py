import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from flexheat.baseline import RuleBasedController
from flexheat.bau import project_bau
from flexheat.cli import main
from flexheat.config import RunConfig, config_from_dict, dump_config, load_config
from flexheat.domain import ConfigError
from flexheat.env import run_episode
from flexheat.evaluation import evaluate_kpis
from flexheat.report import emit_report
from flexheat.scenario import generate_requests, generate_scenario
from flexheat.storage import (
    ParseError,
    load_bau,
    load_requests,
    load_scenario,
    load_trajectory,
    save_bau,
    save_requests,
    save_scenario,
    save_trajectory,
)

DEMO = Path(__file__).resolve().parents[1] / "configs" / "demo.json"


def test_scenario_roundtrip(tmp_path):
    sc = generate_scenario(3, seed=11)
    back = load_scenario(save_scenario(sc, tmp_path / "s.csv"))
    assert back.n_steps == 288 and back.grid.start == sc.grid.start and back.grid.step_minutes == 15
    for name in ("t_amb", "i_solar", "t_neigh", "price"):
        np.testing.assert_allclose(getattr(back, name), getattr(sc, name), rtol=0, atol=1e-12)


def _write(path, rows, header="timestamp,t_amb_c,i_solar_wm2,t_neigh_c,price_chf_per_kwh"):
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


def test_scenario_parse_errors_name_file_row_column(tmp_path):
    good = ["2022-01-03T00:00:00,1,0,23,0.2", "2022-01-03T00:15:00,1,0,23,0.2"]
    bad = _write(tmp_path / "nan.csv", good + ["2022-01-03T00:30:00,1,0,23,nan"])
    with pytest.raises(ParseError) as exc:
        load_scenario(bad)
    assert exc.value.row == 4 and exc.value.column == "price_chf_per_kwh"
    assert "nan.csv" in str(exc.value) and "row 4" in str(exc.value)

    gap = _write(tmp_path / "gap.csv", good + ["2022-01-03T01:00:00,1,0,23,0.2"])
    with pytest.raises(ParseError) as exc:
        load_scenario(gap)
    assert exc.value.column == "timestamp" and exc.value.row == 4

    missing = _write(tmp_path / "col.csv", ["2022-01-03T00:00:00,1,0,23"], header="timestamp,t_amb_c,i_solar_wm2,t_neigh_c")
    with pytest.raises(ParseError) as exc:
        load_scenario(missing)
    assert exc.value.column == "price_chf_per_kwh"

    text = _write(tmp_path / "txt.csv", ["2022-01-03T00:00:00,warm,0,23,0.2"])
    with pytest.raises(ParseError) as exc:
        load_scenario(text)
    assert (exc.value.row, exc.value.column) == (2, "t_amb_c")


def test_requests_bau_and_trajectory_roundtrip(tmp_path):
    sc = generate_scenario(3, seed=2)
    reqs = generate_requests(sc.grid, np.random.default_rng(4))
    assert load_requests(save_requests(reqs, tmp_path / "r.csv")) == reqs
    bau = project_bau(sc, RuleBasedController())
    np.testing.assert_array_equal(load_bau(save_bau(bau, tmp_path / "b.csv")).energy, bau.energy)
    traj = run_episode(sc.with_requests(reqs), RuleBasedController(), bau=bau, use_filter=True, case="x")
    back = load_trajectory(save_trajectory(traj, tmp_path / "t.csv"))
    for a, b in zip(traj.records, back.records):
        for k, v in a.items():
            if isinstance(v, float) and np.isnan(v):
                assert np.isnan(b[k])
            else:
                assert b[k] == v


def test_config_rejects_unknown_and_echoes_effective(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"sed": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"ddpg": {"gama": 0.9}})
    with pytest.raises(ConfigError):
        config_from_dict({"cases": ["RB", "PID"]})
    cfg = load_config(DEMO)
    echo = dump_config(cfg, tmp_path / "eff.json")
    again = load_config(echo)
    assert again == cfg
    full = json.loads(echo.read_text())
    assert full["reward"]["beta"] == 20.0 and full["filter"]["w1"] == 0.5
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_emit_report_empty_and_roundtrip(tmp_path):
    files = emit_report({}, {}, tmp_path / "empty")
    assert not list((tmp_path / "empty").glob("*.svg"))
    assert json.loads((tmp_path / "empty" / "kpi_report.json").read_text()) == {"cases": {}}
    assert files

    traj = run_episode(generate_scenario(1, seed=3), RuleBasedController(), case="RB")
    rep = evaluate_kpis(traj)
    emit_report({"RB": rep}, {"RB": traj}, tmp_path / "one", episode_rewards=[-3.0, -2.0], rb_rewards=[-4.0, -4.0])
    doc = json.loads((tmp_path / "one" / "kpi_report.json").read_text())
    assert doc["cases"]["RB"] == json.loads(json.dumps(rep.to_dict()))
    svgs = sorted((tmp_path / "one").glob("*.svg"))
    assert {p.name for p in svgs} == {"trajectory_RB.svg", "kpi_comparison.svg", "reward_curve.svg"}
    for p in svgs:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")


def test_cli_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code == 2


def test_cli_reports_runtime_errors(tmp_path, capsys):
    assert main(["evaluate", "--case", "DRL_FLEX", "--out", str(tmp_path)]) == 1
    assert "needs --checkpoint" in capsys.readouterr().err


def test_cli_generate_and_rb_evaluate(tmp_path):
    assert main(["generate", "--days", "2", "--seed", "3", "--out", str(tmp_path)]) == 0
    sc = load_scenario(tmp_path / "scenario.csv")
    assert sc.n_steps == 192
    out = tmp_path / "eval"
    assert main(["bau", "--checkpoint", "rb", "--scenario", str(tmp_path / "scenario.csv"), "--out", str(out)]) == 0
    assert main(["evaluate", "--case", "RB", "--scenario", str(tmp_path / "scenario.csv"),
                 "--requests", str(tmp_path / "requests.csv"), "--bau", str(out / "bau.csv"),
                 "--out", str(out)]) == 0
    doc = json.loads((out / "kpi_report.json").read_text())
    assert doc["cases"]["RB"]["n_windows"] == len(load_requests(tmp_path / "requests.csv"))


def test_cli_train_zero_episodes_then_simulate(tmp_path):
    assert main(["train", "--config", str(DEMO), "--episodes", "0", "--out", str(tmp_path)]) == 0
    ck = tmp_path / "checkpoint_noflex.npz"
    assert ck.exists() and (tmp_path / "checkpoint_flex.npz").exists()
    assert (tmp_path / "effective_config.json").exists()
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", str(DEMO), "--case", "DRL_FLEX_RASF",
                 "--checkpoint", str(tmp_path / "checkpoint_flex.npz"), "--bau-checkpoint", str(ck),
                 "--out", str(sim), "--no-plots"]) == 0
    traj = load_trajectory(sim / "trajectory_DRL_FLEX_RASF.csv")
    assert len(traj) == 288


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FLEXHEAT_OUT", str(tmp_path / "envout"))
    assert main(["generate", "--days", "1"]) == 0
    assert (tmp_path / "envout" / "scenario.csv").exists()


def test_cli_compare_demo_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["compare", "--config", str(DEMO), "--out", str(out)]) == 0
        outs.append(out)
    doc = json.loads((outs[0] / "kpi_report.json").read_text())
    assert set(doc["cases"]) == {"RB", "DRL_NOFLEX", "DRL_FLEX", "DRL_FLEX_RASF"}
    names = ["kpi_report.json"] + [f"trajectory_{c}.csv" for c in doc["cases"]] + ["kpi_comparison.svg"]
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
