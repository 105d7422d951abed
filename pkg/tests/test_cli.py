import pytest

from config.settings import Settings
from core.utils.errors import EXIT_OK, EXIT_REPORT_FAILED, EXIT_USAGE
from sim import SimulatorApp, main


@pytest.fixture
def run(tmp_path):
    def _run(*argv):
        return SimulatorApp(Settings()).run([*argv, "--out", str(tmp_path)])
    return _run


@pytest.mark.parametrize("argv", [
    [],
    ["warp-drive"],
    ["latency", "--reps", "0"],
    ["latency", "--seed", "-3"],
    ["latency", "--protocol", "zigbee"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_latency_writes_a_csv(run, tmp_path, capsys):
    assert run("latency", "--protocol", "esb", "--reps", "1") == EXIT_OK
    lines = (tmp_path / "latency.csv").read_text().splitlines()
    assert lines[0].startswith("experiment,protocol,x_name")
    assert len(lines) == 1 + 6
    assert "latency esb payload_bytes=244 latency_us: 680.000" in capsys.readouterr().out


def test_report_without_results_fails(run, capsys):
    assert run("report") == EXIT_REPORT_FAILED
    assert "not run" in capsys.readouterr().out


def test_plot_after_a_run(run, tmp_path):
    assert run("latency", "--protocol", "esb", "--reps", "1") == EXIT_OK
    assert run("plot", "latency") == EXIT_OK
    assert (tmp_path / "latency.svg").exists()


def test_plot_with_nothing_to_plot(run):
    assert run("plot") == EXIT_OK


def test_bad_scenario_file_is_a_usage_error(run, tmp_path):
    config = tmp_path / "scenario.json"
    config.write_text('{"esb": {"retries": 3}}')
    assert run("latency", "--config", str(config)) == EXIT_USAGE


def test_uncalibrated_run(run, tmp_path, monkeypatch):
    monkeypatch.setenv("SIM_CALIBRATION", str(tmp_path / "missing.json"))
    assert run("single-packet", "--protocol", "esb", "--uncalibrated") == EXIT_OK
    assert (tmp_path / "single-packet.csv").exists()
