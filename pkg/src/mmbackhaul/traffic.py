"""Demand profiles and packet arrivals."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class Segment:
    start: int
    dl: int
    ul: int


@dataclass
class DemandProfile:
    """Piecewise-constant per-BS rates in bits per subframe.

    ``segments[node]`` is sorted by start subframe; a segment holds until the
    next one starts. Nodes without segments have zero demand.
    """

    segments: dict[int, list[Segment]] = field(default_factory=dict)

    def __post_init__(self):
        for node, segs in self.segments.items():
            starts = [s.start for s in segs]
            if starts != sorted(set(starts)):
                raise ValueError(f"segments of node {node} must have strictly increasing starts")
            if any(s.dl < 0 or s.ul < 0 for s in segs):
                raise ValueError(f"negative rate in profile of node {node}")

    @classmethod
    def uniform(cls, nodes, dl: int, ul: int) -> "DemandProfile":
        return cls({n: [Segment(1, dl, ul)] for n in nodes})

    def rates(self, node: int, subframe: int) -> tuple[int, int]:
        segs = self.segments.get(node)
        if not segs:
            return 0, 0
        i = bisect.bisect_right([s.start for s in segs], subframe) - 1
        if i < 0:
            return 0, 0
        return segs[i].dl, segs[i].ul

    def with_steps(self, node: int, steps: list[tuple[int, int | None, int | None]]) -> "DemandProfile":
        """Copy with step changes at ``node``; ``None`` keeps the previous value."""
        segs = dict(self.segments)
        base = list(segs.get(node, [Segment(1, 0, 0)]))
        for start, dl, ul in sorted(steps, key=lambda s: s[0]):
            cur_dl, cur_ul = DemandProfile({node: base}).rates(node, start)
            seg = Segment(start, cur_dl if dl is None else dl, cur_ul if ul is None else ul)
            base = [s for s in base if s.start != start] + [seg]
            base.sort(key=lambda s: s.start)
        segs[node] = base
        return DemandProfile(segs)

    def to_dict(self) -> dict:
        return {str(n): [[s.start, s.dl, s.ul] for s in segs] for n, segs in sorted(self.segments.items())}

    @classmethod
    def from_dict(cls, data: dict) -> "DemandProfile":
        return cls({int(n): [Segment(int(a), int(b), int(c)) for a, b, c in segs] for n, segs in data.items()})


class ArrivalModel:
    """Converts rates into whole packets per subframe.

    ``deterministic`` carries fractional packets forward so counts integrate
    the rate exactly; ``poisson`` draws from a seeded generator.
    """

    def __init__(self, packet_bits: int, kind: str = "deterministic", seed: int = 0):
        if kind not in ("deterministic", "poisson"):
            raise ValueError(f"unknown arrival kind {kind!r}")
        self.packet_bits = packet_bits
        self.kind = kind
        self.seed = seed
        self._carry: dict[tuple[int, str], Fraction] = {}
        self._rng = np.random.default_rng(seed)

    def draw(self, node: int, direction: str, rate_bits: int) -> int:
        if self.kind == "poisson":
            return int(self._rng.poisson(rate_bits / self.packet_bits)) if rate_bits > 0 else 0
        acc = self._carry.get((node, direction), Fraction(0)) + Fraction(rate_bits, self.packet_bits)
        whole = acc.numerator // acc.denominator
        self._carry[(node, direction)] = acc - whole
        return whole


def arrivals_for(profile: DemandProfile, node: int, subframe: int, model: ArrivalModel) -> tuple[int, int]:
    """Packets arriving this subframe: downlink ones (queued at the macro) and uplink ones (queued at ``node``)."""
    dl, ul = profile.rates(node, subframe)
    return model.draw(node, "D", dl), model.draw(node, "U", ul)


def bits_per_subframe(rate_bps: float, subframe_duration: float) -> int:
    return int(round(rate_bps * subframe_duration))


def tracking_profile(
    nodes,
    target: int,
    subframe_duration: float = 1e-4,
    dl_bps: float = 0.67e9,
    ul_bps: float = 0.33e9,
    dl_up_at: int = 250,
    ul_up_at: int = 400,
    dl_down_at: int = 600,
    ul_down_at: int = 750,
) -> DemandProfile:
    """Uniform demand with the target BS doubling its downlink then uplink, then reverting both."""
    dl = bits_per_subframe(dl_bps, subframe_duration)
    ul = bits_per_subframe(ul_bps, subframe_duration)
    profile = DemandProfile.uniform(nodes, dl, ul)
    return profile.with_steps(target, [
        (dl_up_at, 2 * dl, None),
        (ul_up_at, None, 2 * ul),
        (dl_down_at, dl, None),
        (ul_down_at, None, ul),
    ])
