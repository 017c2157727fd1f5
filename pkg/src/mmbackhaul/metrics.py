"""Per-subframe measurements, fairness and demand-tracking statistics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .errors import UndefinedFairnessError

CSV_COLUMNS = ("subframe", "node", "dl_bits", "ul_bits", "total_bits", "dl_queue", "ul_queue",
               "n_hat", "dropped_packets", "placement_repairs")


@dataclass(frozen=True)
class MetricsRecord:
    """What happened in one subframe.

    Per-node tuples are indexed by node id (index 0 is the macro). Delivered
    bits are attributed to the small cell a downlink packet reached, or that
    an uplink packet came from once it arrived at the macro.
    """

    subframe: int
    dl_bits: tuple[int, ...]
    ul_bits: tuple[int, ...]
    dl_queue: tuple[int, ...]
    ul_queue: tuple[int, ...]
    n_hat: tuple[int, ...]
    placement_repairs: int = 0
    dropped_links: int = 0
    macro_base_slots: int | None = None
    macro_slots: int | None = None
    dropped_packets: tuple[int, ...] = ()

    @property
    def aggregate_throughput(self) -> int:
        return sum(self.dl_bits) + sum(self.ul_bits)

    def throughput(self, node: int) -> int:
        return self.dl_bits[node] + self.ul_bits[node]


def jain_index(values: Sequence[float]) -> float:
    """(sum x)^2 / (n * sum x^2)."""
    xs = [float(v) for v in values]
    if not xs:
        raise UndefinedFairnessError("fairness of an empty set")
    if any(x < 0 for x in xs):
        raise ValueError("throughput values must be non-negative")
    sq = sum(x * x for x in xs)
    if sq == 0:
        raise UndefinedFairnessError("all throughputs are zero")
    return sum(xs) ** 2 / (len(xs) * sq)


def window_average(series: Sequence[float], window: int) -> list[float]:
    """Trailing moving average; the first values average over what is available."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out, acc = [], 0.0
    for i, x in enumerate(series):
        acc += x
        if i >= window:
            acc -= series[i - window]
        out.append(acc / min(i + 1, window))
    return out


def tracking_latency(
    series: Sequence[float],
    step_subframe: int,
    old_level: float,
    new_level: float,
    band: float = 0.1,
    dwell: int = 5,
    smooth: int = 1,
) -> int | None:
    """Subframes from a demand step until throughput settles at the new level.

    ``series[t]`` is the throughput in subframe ``t``. After optional trailing
    smoothing, returns the offset of the first subframe from which ``dwell``
    consecutive values lie within ``band * new_level`` of ``new_level``, or
    None if that never happens.
    """
    if old_level == new_level:
        raise ValueError("old and new levels must differ")
    if dwell < 1:
        raise ValueError("dwell must be at least 1")
    values = window_average(series, smooth) if smooth > 1 else list(series)
    tol = band * abs(new_level)
    run = 0
    for t in range(step_subframe, len(values)):
        if abs(values[t] - new_level) <= tol:
            run += 1
            if run == dwell:
                return t - dwell + 1 - step_subframe
        else:
            run = 0
    return None


def mean_throughput(records: Sequence[MetricsRecord], node: int, start: int = 0,
                    stop: int | None = None) -> float:
    """Average delivered bits per subframe of ``node`` over ``start <= subframe < stop``."""
    chosen = [r for r in records if r.subframe >= start and (stop is None or r.subframe < stop)]
    if not chosen:
        return 0.0
    return sum(r.throughput(node) for r in chosen) / len(chosen)


def metrics_rows(records: Sequence[MetricsRecord]):
    for r in records:
        for node in range(1, len(r.dl_bits)):
            dl, ul = r.dl_bits[node], r.ul_bits[node]
            drops = r.dropped_packets[node] if r.dropped_packets else 0
            yield (r.subframe, node, dl, ul, dl + ul, r.dl_queue[node], r.ul_queue[node], r.n_hat[node], drops, "")
        yield (r.subframe, "all", sum(r.dl_bits), sum(r.ul_bits), r.aggregate_throughput,
               sum(r.dl_queue), sum(r.ul_queue), "", sum(r.dropped_packets), r.placement_repairs)


def metrics_csv(records: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(metrics_rows(records))
    return buf.getvalue()
