import json

import pytest

import app
from src.metrics import read_csv
from src.scenario import REFERENCE_PROFILES
from src import config


@pytest.fixture
def short_scenario(tmp_path):
    connections = [
        {"cid": cid, "ms": (cid - 1) // 5 + 1, "class": cls}
        for cid, cls in enumerate(["UGS", "ERT_VR", "RT_VR", "NRT_VR", "BE"] * 2, 1)
    ]
    path = tmp_path / "short.json"
    path.write_text(json.dumps({
        "duration": 40,
        "seed": 3,
        "profiles": REFERENCE_PROFILES,
        "connections": connections,
    }), encoding="utf-8")
    return path


def test_validate_reference(capsys):
    assert app.main(["validate", str(config.REFERENCE_SCENARIO)]) == 0
    out = capsys.readouterr().out
    assert "SCENARIO reference: valid" in out
    assert "Connections     : 45" in out


def test_run_writes_csv(tmp_path, short_scenario):
    out = tmp_path / "results"
    assert app.main(["run", str(short_scenario), "--scheduler", "fifo", "--out", str(out), "--window", "10"]) == 0
    rows = read_csv(out / "short_fifo.csv")
    assert set(rows["scheduler"]) == {"fifo"}
    assert set(rows["seed"]) == {3}


def test_seed_override(tmp_path, short_scenario):
    out = tmp_path / "results"
    assert app.main(["run", str(short_scenario), "--seed", "99", "--out", str(out)]) == 0
    assert set(read_csv(out / "short_apds.csv")["seed"]) == {99}


def test_compare_skips_unsupported_scheduler(tmp_path, short_scenario, capsys):
    out = tmp_path / "results"
    code = app.main([
        "compare", str(short_scenario), "--schedulers", "apds,scsa,fifo,dfpq", "--out", str(out),
    ])
    assert code == 0
    assert "note: scheduler 'scsa' is not supported; skipping" in capsys.readouterr().err

    rows = read_csv(out / "short_compare.csv")
    assert list(dict.fromkeys(rows["scheduler"])) == ["apds", "fifo", "dfpq"]


def test_compare_is_deterministic(tmp_path, short_scenario):
    first, second, parallel = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert app.main(["compare", str(short_scenario), "--out", str(first)]) == 0
    assert app.main(["compare", str(short_scenario), "--out", str(second)]) == 0
    assert app.main(["compare", str(short_scenario), "--out", str(parallel), "--workers", "2"]) == 0

    expected = (first / "short_compare.csv").read_bytes()
    assert (second / "short_compare.csv").read_bytes() == expected
    assert (parallel / "short_compare.csv").read_bytes() == expected


def test_rejected_scenario_exits_with_failure(tmp_path, capsys):
    path = tmp_path / "dup.json"
    path.write_text(json.dumps({
        "profiles": REFERENCE_PROFILES,
        "connections": [{"cid": 1, "class": "BE"}, {"cid": 1, "class": "UGS"}],
    }), encoding="utf-8")
    assert app.main(["run", str(path), "--out", str(tmp_path)]) == 1
    assert "ScenarioError: duplicate CID 1" in capsys.readouterr().err


def test_missing_scenario_exits_with_failure(tmp_path):
    assert app.main(["validate", str(tmp_path / "absent.json")]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["compare", "scenario.json", "--schedulers", "wfq"],
        ["compare", "scenario.json", "--schedulers", "scsa"],
        ["run", "scenario.json", "--scheduler", "scsa"],
        ["run", "scenario.json", "--window", "0"],
        ["compare", "scenario.json", "--workers", "0"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as excinfo:
        app.main(argv)
    assert excinfo.value.code == 2


def test_no_command_prints_help(capsys):
    assert app.main([]) == 2
    assert "usage" in capsys.readouterr().out


def test_inexact_weights_rejected_before_run(tmp_path, capsys):
    path = tmp_path / "thirds.json"
    path.write_text(json.dumps({
        "weights": {"be": [0.3333333333333333, 0.6666666666666666], "nrt": [0.6, 0.4]},
        "profiles": REFERENCE_PROFILES,
        "connections": [{"cid": 1, "class": "BE"}],
    }), encoding="utf-8")
    assert app.main(["run", str(path), "--out", str(tmp_path)]) == 1
    assert "weights.be" in capsys.readouterr().err
