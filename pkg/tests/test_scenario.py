import json
from pathlib import Path

import pytest

from src.core import ServiceClass
from src.scenario import (
    ScenarioError,
    load_scenario,
    parse_scenario,
    parse_service_class,
    reference_scenario,
    scenario_hash,
)
from src.traffic import TrafficKind

REFERENCE = Path(__file__).resolve().parent.parent / "data" / "scenarios" / "reference.json"

BE_PROFILE = {
    "BE": {
        "qos": {"max_sustained_rate": 576_000, "max_latency": 2_000_000, "packet_size": 120},
        "traffic": {"kind": "POISSON", "mean_rate": 256_000},
    }
}


def minimal(**fields):
    data = {"profiles": BE_PROFILE, "connections": [{"cid": 1, "class": "BE"}]}
    data.update(fields)
    return data


def write_json(tmp_path, data, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_reference_file_loads():
    scenario = load_scenario(REFERENCE)
    assert scenario.name == "reference"
    assert len(scenario.connections) == 45
    assert scenario.eta == 50
    assert scenario.weights.be == (0.6, 0.4)
    assert scenario.weights.nrt == (0.6, 0.4)
    assert scenario.total_bytes == 6250

    setups = scenario.resolved_connections()
    assert [setup.cid for setup in setups] == list(range(1, 46))
    assert sum(setup.service_class is ServiceClass.UGS for setup in setups) == 9
    assert {setup.ms for setup in setups} == set(range(1, 10))


def test_reference_file_matches_builder():
    assert load_scenario(REFERENCE).model_dump() == reference_scenario().model_dump()


def test_reference_reserved_load_leaves_headroom():
    scenario = reference_scenario()
    reserved = sum(setup.qos.min_bytes(scenario.frame) for setup in scenario.resolved_connections())
    assert reserved == 5040
    assert 0.75 <= reserved / scenario.total_bytes <= 0.85


@pytest.mark.parametrize("value", ["ERT_VR", "ERT-VR", "ert-vr", " ert_vr "])
def test_parse_service_class_spellings(value):
    assert parse_service_class(value) is ServiceClass.ERT_VR


def test_parse_service_class_unknown():
    with pytest.raises(ValueError, match="unknown service class"):
        parse_service_class("GOLD")


def test_connection_override_wins_over_profile():
    scenario = parse_scenario(minimal(connections=[
        {"cid": 7, "class": "BE", "qos": {"packet_size": 500}, "traffic": {"kind": "CBR"}},
    ]))
    (setup,) = scenario.resolved_connections()
    assert setup.qos.packet_size == 500
    assert setup.qos.max_latency == 2_000_000
    assert setup.qos.min_reserved_rate == 0
    assert setup.traffic.kind is TrafficKind.CBR
    assert setup.traffic.mean_rate == 256_000
    assert setup.traffic.seed_stream == 7


def test_default_traffic_kind_per_class():
    profile = {"qos": {"max_sustained_rate": 1_000, "min_reserved_rate": 500, "max_latency": 10_000,
                       "packet_size": 100}, "traffic": {"mean_rate": 800, "mean_on": 10, "mean_off": 10}}
    scenario = parse_scenario({
        "profiles": {"RT-VR": profile},
        "connections": [{"cid": 1, "class": "rt-vr"}],
    })
    (setup,) = scenario.resolved_connections()
    assert setup.service_class is ServiceClass.RT_VR
    assert setup.traffic.kind is TrafficKind.ON_OFF


def test_duplicate_cid_rejected():
    data = minimal(connections=[{"cid": 3, "class": "BE"}, {"cid": 3, "class": "BE"}])
    with pytest.raises(ScenarioError, match="duplicate CID 3"):
        parse_scenario(data)


def test_missing_min_reserved_rate_rejected():
    data = {
        "profiles": {"UGS": {"qos": {"max_sustained_rate": 256_000, "max_latency": 20_000,
                                     "packet_size": 160},
                             "traffic": {"mean_rate": 256_000}}},
        "connections": [{"cid": 4, "class": "UGS"}],
    }
    with pytest.raises(ScenarioError, match=r"connections\[0\] \(CID 4\)\.qos\.min_reserved_rate"):
        parse_scenario(data)


def test_be_with_reserved_rate_rejected():
    data = minimal(connections=[{"cid": 1, "class": "BE", "qos": {"min_reserved_rate": 1_000}}])
    with pytest.raises(ScenarioError, match="min_reserved_rate"):
        parse_scenario(data)


def test_min_above_max_rate_rejected():
    data = {
        "profiles": {"NRT_VR": {"qos": {"max_sustained_rate": 100_000, "min_reserved_rate": 200_000,
                                        "max_latency": 1_000_000, "packet_size": 120},
                                "traffic": {"mean_rate": 50_000}}},
        "connections": [{"cid": 2, "class": "NRT_VR"}],
    }
    with pytest.raises(ScenarioError, match=r"\(CID 2\)\.qos"):
        parse_scenario(data)


@pytest.mark.parametrize(
    "fields, match",
    [
        ({"bandwidth": 5}, "bandwidth"),
        ({"scheduler": "scsa"}, "not supported"),
        ({"scheduler": "wfq"}, "not supported"),
        ({"frame": 0}, "frame"),
        ({"seed": -1}, "seed"),
        ({"weights": {"be": [0.5, 0.4], "nrt": [0.6, 0.4]}}, "sum to 1"),
        ({"weights": {"be": [0.3333333333333333, 0.6666666666666666], "nrt": [0.6, 0.4]}}, r"weights\.be"),
        ({"connections": []}, "connections"),
        ({"dfpq_weights": {"UGS": 1.0}}, "missing classes"),
    ],
)
def test_invalid_fields_rejected(fields, match):
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(minimal(**fields))


def test_unknown_connection_key_rejected():
    data = minimal(connections=[{"cid": 1, "class": "BE", "priority": 3}])
    with pytest.raises(ScenarioError, match="priority"):
        parse_scenario(data)


def test_load_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"connections": [', encoding="utf-8")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read scenario"):
        load_scenario(tmp_path / "absent.json")


def test_name_defaults_to_file_stem(tmp_path):
    scenario = load_scenario(write_json(tmp_path, minimal(), "small_cell.json"))
    assert scenario.name == "small_cell"


def test_scenario_hash_is_stable():
    first = reference_scenario()
    assert scenario_hash(first) == scenario_hash(reference_scenario())
    assert len(scenario_hash(first)) == 12
    assert scenario_hash(first) != scenario_hash(reference_scenario(seed=1))


def test_scenario_is_immutable():
    scenario = parse_scenario(minimal())
    with pytest.raises(Exception):
        scenario.duration = 10
