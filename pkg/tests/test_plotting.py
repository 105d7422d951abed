import pytest

from core.services.plotting import PLOT_KINDS, plot
from core.utils.errors import ErrorCode, SchemaMismatch, SimError
from repositories.results import COLUMNS, ResultRepository, ResultRow


@pytest.fixture
def latency_csv(tmp_path):
    rows = [ResultRow("latency", p, "payload_bytes", x, "latency_us", v + seed, "us", seed)
            for p, base in (("esb", 200.0), ("ble", 5000.0))
            for x, v in ((2, base), (244, base + 480))
            for seed in (1, 2)]
    return ResultRepository(tmp_path).save(rows, "latency")


def test_plot_is_deterministic(latency_csv, tmp_path):
    first = plot(latency_csv, "latency", tmp_path / "a.svg")
    second = plot(latency_csv, "latency", tmp_path / "b.svg")
    assert first.read_text().startswith("<?xml")
    assert first.read_bytes() == second.read_bytes()


def test_default_output_sits_next_to_the_csv(latency_csv):
    assert plot(latency_csv, "latency") == latency_csv.with_suffix(".svg")


@pytest.mark.parametrize("kind", sorted(PLOT_KINDS))
def test_header_only_csv_renders_empty_axes(tmp_path, kind):
    csv = tmp_path / "empty.csv"
    csv.write_text(",".join(COLUMNS) + "\n")
    assert plot(csv, kind).exists()


def test_missing_columns(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("experiment,protocol\nlatency,esb\n")
    with pytest.raises(SchemaMismatch):
        plot(csv, "latency")


def test_unknown_kind(latency_csv):
    with pytest.raises(SimError) as info:
        plot(latency_csv, "pie")
    assert info.value.code is ErrorCode.INVALID_INPUT


def test_missing_file(tmp_path):
    with pytest.raises(SimError) as info:
        plot(tmp_path / "nothing.csv", "latency")
    assert info.value.code is ErrorCode.NOT_FOUND
