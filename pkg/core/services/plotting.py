"""
SVG figures from experiment CSVs.

Output is deterministic: fixed size, fixed SVG id salt and no creation date,
so re-plotting the same CSV gives the same bytes.
"""
from collections import defaultdict
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from core.utils.errors import ErrorCode, SimError  # noqa: E402
from core.utils.logger import get_logger  # noqa: E402
from repositories.results import ResultRepository, ResultRow  # noqa: E402

logger = get_logger(__name__)

REQUIRED_COLUMNS = ("experiment", "protocol", "x_name", "x_value", "metric", "value", "unit")
FIGSIZE = (6.4, 4.0)

plt.rcParams.update({
    "svg.hashsalt": "ble-esb-sim",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
})


def _numeric(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _mean_by(rows: List[ResultRow], metric: str) -> Dict[str, List[Tuple[float, float, float]]]:
    """protocol -> sorted [(x, mean, std)] over numeric x values"""
    grouped: Dict[Tuple[str, float], List[float]] = defaultdict(list)
    for row in rows:
        if row.metric == metric and _numeric(row.x_value):
            grouped[(row.protocol, float(row.x_value))].append(row.value)
    series: Dict[str, List[Tuple[float, float, float]]] = defaultdict(list)
    for (protocol, x), values in sorted(grouped.items()):
        series[protocol].append((x, float(np.mean(values)), float(np.std(values))))
    return dict(series)


def _pairs(rows: List[ResultRow], x_metric: str, y_metric: str) -> Dict[str, List[Tuple[float, float]]]:
    """protocol -> [(x, y)] pairing two metrics measured at the same point and seed"""
    xs: Dict[Tuple, float] = {}
    ys: Dict[Tuple, float] = {}
    for row in rows:
        key = (row.protocol, str(row.x_value), row.seed)
        if row.metric == x_metric:
            xs[key] = row.value
        elif row.metric == y_metric:
            ys[key] = row.value
    series: Dict[str, List[Tuple[float, float]]] = defaultdict(list)
    for key in xs:
        if key in ys:
            series[key[0]].append((xs[key], ys[key]))
    return {p: sorted(points) for p, points in series.items()}


def _latency(ax, rows: List[ResultRow]) -> None:
    for protocol, points in _mean_by(rows, "latency_us").items():
        x, mean, std = zip(*points)
        ax.errorbar(x, np.asarray(mean) / 1000, yerr=np.asarray(std) / 1000, marker="o", capsize=3, label=protocol)
    ax.set_xlabel("Payload (B)")
    ax.set_ylabel("Latency (ms)")


def _throughput(ax, rows: List[ResultRow]) -> None:
    for protocol, points in _pairs(rows, "throughput_kbps", "power_mw").items():
        x, y = zip(*points)
        ax.plot(x, y, marker="o", label=protocol)
    ax.set_xlabel("Throughput (kbps)")
    ax.set_ylabel("Average power (mW)")


def _rssi(ax, rows: List[ResultRow]) -> None:
    for protocol, points in _mean_by(rows, "normalized_throughput").items():
        x, mean, _std = zip(*points)
        ax.plot(x, mean, marker="o", label=protocol)
    ax.set_xlabel("RSSI (dBm)")
    ax.set_ylabel("Normalized throughput")


def _bidir(ax, rows: List[ResultRow]) -> None:
    suffixes = sorted({r.metric[len("forward_kbps"):] for r in rows if r.metric.startswith("forward_kbps")})
    for suffix in suffixes:
        for protocol, points in _pairs(rows, f"forward_kbps{suffix}", f"reverse_kbps{suffix}").items():
            x, y = zip(*points)
            label = f"{protocol} {suffix.lstrip('_')}".strip()
            ax.plot(x, y, marker="o", label=label)
    ax.set_xlabel("Forward throughput (kbps)")
    ax.set_ylabel("Reverse throughput (kbps)")


def _loop_recorder(ax, rows: List[ResultRow]) -> None:
    for protocol, points in _mean_by(rows, "mcu_avg_mw").items():
        x, mean, _std = zip(*points)
        ax.plot(x, mean, marker=".", label=protocol)
    for protocol, points in _mean_by(rows, "sensor_avg_mw").items():
        x, mean, _std = zip(*points)
        ax.plot(x, mean, linestyle="--", linewidth=0.8, label=f"{protocol} sensor")
    ax.set_xlabel("FIFO threshold (samples)")
    ax.set_ylabel("Average power (mW)")


def _bars(ax, rows: List[ResultRow], metrics: List[str], labels: List[str]) -> None:
    protocols = sorted({r.protocol for r in rows if r.metric in metrics})
    width = 0.8 / max(1, len(protocols))
    positions = np.arange(len(metrics))
    for i, protocol in enumerate(protocols):
        heights = []
        for metric in metrics:
            values = [r.value for r in rows if r.protocol == protocol and r.metric == metric]
            heights.append(float(np.mean(values)) if values else 0.0)
        ax.bar(positions + i * width, heights, width, label=protocol)
    ax.set_xticks(positions + width * (len(protocols) - 1) / 2)
    ax.set_xticklabels(labels)


def _dutycycle(ax, rows: List[ResultRow]) -> None:
    metrics = sorted({r.metric for r in rows if r.metric.startswith("energy_uj_")})
    _bars(ax, rows, metrics, [m[len("energy_uj_"):].capitalize() for m in metrics])
    ax.set_ylabel("Warm-up energy (uJ)")


def _single_packet(ax, rows: List[ResultRow]) -> None:
    for protocol, points in _mean_by(rows, "energy_uj").items():
        if protocol == "both":
            continue
        x, mean, _std = zip(*points)
        ax.plot(x, mean, marker="o", label=protocol)
    ax.set_xlabel("Payload (B)")
    ax.set_ylabel("Energy above standby (uJ)")


PLOT_KINDS: Dict[str, Tuple[str, Callable]] = {
    "latency": ("Latency per payload", _latency),
    "throughput": ("Power versus throughput", _throughput),
    "rssi": ("Throughput versus RSSI", _rssi),
    "bidir": ("Bidirectional throughput", _bidir),
    "loop-recorder": ("Loop recorder power per FIFO threshold", _loop_recorder),
    "dutycycle": ("Warm-up energy per phase", _dutycycle),
    "single-packet": ("Single-packet energy", _single_packet),
}


def load_rows(csv_path: Path) -> List[ResultRow]:
    """Rows of a result CSV; a zero-byte file is an empty result"""
    if csv_path.stat().st_size == 0:
        return []
    return ResultRepository(csv_path.parent).load(csv_path.name, required=REQUIRED_COLUMNS)


def plot(csv_path, kind: str, out_path=None) -> Path:
    """Render `csv_path` as an SVG of the given kind; returns the SVG path"""
    if kind not in PLOT_KINDS:
        raise SimError(f"Unknown plot kind '{kind}'", code=ErrorCode.INVALID_INPUT,
                       details={"known": sorted(PLOT_KINDS)})
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise SimError(f"Result file not found: {csv_path}", code=ErrorCode.NOT_FOUND)
    rows = load_rows(csv_path)
    out = Path(out_path) if out_path is not None else csv_path.with_suffix(".svg")
    title, draw = PLOT_KINDS[kind]

    fig, ax = plt.subplots(figsize=FIGSIZE)
    try:
        if rows:
            draw(ax, rows)
        ax.set_title(title)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        fig.tight_layout()
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.info(f"Plotted {csv_path.name} ({len(rows)} rows) to {out}")
    return out
