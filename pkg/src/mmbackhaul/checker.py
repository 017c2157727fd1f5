"""Independent validity checks for emitted final schedules.

Deliberately re-derives slot occupancy from the raw numbers instead of
reusing the placement code.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .node import FinalSchedule
from .topology import MACRO, TreeTopology


@dataclass(frozen=True)
class Violation:
    subframe: int
    node: int
    constraint: str
    detail: str

    def __str__(self) -> str:
        return f"subframe {self.subframe} node {self.node}: {self.constraint}: {self.detail}"


@dataclass
class ValidationReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _occupancy(alpha: int, n: int, start: int, child_end: bool) -> list[int]:
    offset = alpha - 1 if child_end else 0
    return [start + alpha * m + offset for m in range(n)]


def check_schedule(sched: FinalSchedule, topology: TreeTopology, n_d: int) -> list[Violation]:
    out = []
    node, t = sched.node, sched.subframe_index

    def bad(constraint, detail):
        out.append(Violation(t, node, constraint, detail))

    if topology.is_leaf(node):
        bad("leaf", "leaf BSs must not emit final schedules")
    windows = {}
    for link, a in sched.allocations.items():
        if link not in topology.children[node]:
            bad("topology", f"link {link} is not a child link")
            continue
        if a.alpha != topology.alpha[link]:
            bad("alpha", f"link {link} alpha {a.alpha} != {topology.alpha[link]}")
        if a.n_total < 1 or a.n_down < 0 or a.n_up < 0 or a.n_down + a.n_up != a.n_total:
            bad("directions", f"link {link}: {a.n_down}+{a.n_up} != {a.n_total}")
        lo, hi = a.start, a.start + topology.alpha[link] * a.n_total
        if lo < 0 or hi > n_d:
            bad("bounds", f"link {link} window [{lo},{hi}) outside [0,{n_d})")
        if a.n_total > a.cap:
            bad("n_hat cap", f"link {link} got {a.n_total} slots above reported {a.cap}")
        windows[link] = (lo, hi)

    links = sorted(windows)
    for i, j in ((x, y) for k, x in enumerate(links) for y in links[k + 1:]):
        if topology.interferes(i, j):
            (a0, a1), (b0, b1) = windows[i], windows[j]
            if a0 < b1 and b0 < a1:
                bad("interference", f"links {i} and {j} overlap")

    busy = [0] * n_d
    if node != MACRO and sched.parent_link is not None and sched.parent_link.n_total > 0:
        p = sched.parent_link
        p_lo, p_hi = p.start, p.start + topology.alpha[node] * p.n_total
        for link, (lo, hi) in windows.items():
            if topology.interferes(node, link) and lo < p_hi and p_lo < hi:
                bad("parent window", f"link {link} overlaps the parent link window")
        for slot in _occupancy(topology.alpha[node], p.n_total, p.start, child_end=True):
            if 0 <= slot < n_d:
                busy[slot] += 1
    for link, a in sched.allocations.items():
        if link in windows:
            for slot in _occupancy(topology.alpha[link], a.n_total, a.start, child_end=False):
                if 0 <= slot < n_d:
                    busy[slot] += 1
    for slot, count in enumerate(busy):
        if count > topology.radio_chains[node]:
            bad("radio chains", f"slot {slot} has {count} active links, cap {topology.radio_chains[node]}")
    return out


def validate_schedules(schedules, topology: TreeTopology, n_d: int) -> ValidationReport:
    report = ValidationReport()
    by_key = {(s.node, s.subframe_index): s for s in schedules}
    for sched in schedules:
        report.checked += 1
        report.violations.extend(check_schedule(sched, topology, n_d))
        if sched.node != MACRO:
            parent = by_key.get((topology.parents[sched.node], sched.subframe_index))
            upstream = None if parent is None else parent.allocations.get(sched.node)
            if parent is None:
                report.violations.append(Violation(sched.subframe_index, sched.node, "happen-before",
                                                   "no parent schedule for this subframe in the log"))
            elif upstream != sched.parent_link:
                report.violations.append(Violation(sched.subframe_index, sched.node, "parent link",
                                                   "recorded parent allocation differs from the parent's schedule"))
    if not schedules:
        report.warnings.append("schedule log is empty")
    return report


def read_schedule_log(path: Path) -> list[FinalSchedule]:
    with open(path) as fh:
        return [FinalSchedule.from_dict(json.loads(line)) for line in fh if line.strip()]


def validate_schedule_log(run_dir: str | Path) -> ValidationReport:
    """Replay ``schedules.jsonl`` of a run directory through the checker."""
    run_dir = Path(run_dir)
    topology = TreeTopology.from_text((run_dir / "topology.txt").read_text())
    manifest = json.loads((run_dir / "manifest.json").read_text())
    n_d = int(manifest["data_slots"])
    log = run_dir / "schedules.jsonl"
    if not log.exists():
        raise FileNotFoundError(f"{log} missing; rerun with the schedule log enabled")
    report = validate_schedules(read_schedule_log(log), topology, n_d)
    for w in report.warnings:
        warnings.warn(w)
    return report
