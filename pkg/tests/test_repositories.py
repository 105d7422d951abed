import json

import pytest

from config.settings import DATA_DIR
from core.services.experiments import EXPERIMENT_NAMES
from core.utils.errors import ErrorCode, SchemaMismatch, SimError, SpecError
from repositories.results import ResultRepository, ResultRow, format_number
from repositories.targets import TargetRepository



def _rows():
    return [
        ResultRow("latency", "esb", "payload_bytes", 244, "latency_us", 680.0, "us", 1, "abc"),
        ResultRow("latency", "ble", "payload_bytes", 244, "latency_us", 5537.25, "us", 1, "abc"),
    ]


def test_csv_save_and_load(tmp_path):
    repo = ResultRepository(tmp_path)
    path = repo.save(_rows(), "latency")
    assert path == tmp_path / "latency.csv"
    lines = path.read_text().splitlines()
    assert lines[0] == "experiment,protocol,x_name,x_value,metric,value,unit,seed,calib_hash,sim_version"
    assert lines[1].startswith("latency,esb,payload_bytes,244,latency_us,680,us,1,abc,")
    assert repo.load("latency") == _rows()


def test_load_all_skips_foreign_csvs(tmp_path):
    repo = ResultRepository(tmp_path)
    repo.save(_rows(), "latency")
    (tmp_path / "notes.csv").write_text("a,b\n1,2\n")
    assert len(repo.load_all()) == 2


def test_missing_columns_raise(tmp_path):
    (tmp_path / "bad.csv").write_text("experiment,value\nlatency,1\n")
    with pytest.raises(SchemaMismatch):
        ResultRepository(tmp_path).load("bad")


@pytest.mark.parametrize("value, text", [
    (1.0, "1"),
    (0.1234567, "0.123457"),
    (-0.0000001, "0"),
    (7, "7"),
    (True, "1"),
    ("max", "max"),
])
def test_number_formatting_is_fixed(value, text):
    assert format_number(value) == text


def _write_targets(tmp_path, targets):
    (tmp_path / "targets.json").write_text(json.dumps({"version": "1", "targets": targets}))
    return tmp_path / "targets.json"


def _target(**overrides):
    target = {"id": "esb_latency", "experiment": "latency", "protocol": "esb",
              "metric": "latency_us", "target": 680, "tolerance": 0.1}
    target.update(overrides)
    return target


def test_targets_load(tmp_path):
    path = _write_targets(tmp_path, [_target()])
    table = TargetRepository(tmp_path, known_experiments=["latency"]).load(path.name)
    assert table.experiments() == ["latency"]
    assert table.entries[0].bounds() == pytest.approx((612.0, 748.0))


@pytest.mark.parametrize("targets", [
    [_target(experiment="warp-drive")],
    [_target(), _target()],
    [_target(aggregate="median")],
    [_target(comparison="roughly")],
    [_target(tolerance=-1)],
])
def test_invalid_targets_raise(tmp_path, targets):
    path = _write_targets(tmp_path, targets)
    with pytest.raises(SpecError):
        TargetRepository(tmp_path, known_experiments=["latency"]).load(path.name)


def test_unknown_target_field_is_a_schema_error(tmp_path):
    path = _write_targets(tmp_path, [_target(colour="red")])
    with pytest.raises(SchemaMismatch):
        TargetRepository(tmp_path).load(path.name)


def test_missing_target_file(tmp_path):
    with pytest.raises(SimError) as info:
        TargetRepository(tmp_path).load("nope.json")
    assert info.value.code is ErrorCode.NOT_FOUND


def test_shipped_targets_are_valid():
    table = TargetRepository(DATA_DIR, known_experiments=EXPERIMENT_NAMES + ("calibrate",)).load("targets.json")
    assert set(table.experiments()) == {
        "latency", "single-packet", "throughput", "rssi", "dutycycle", "bidir", "loop-recorder"
    }
