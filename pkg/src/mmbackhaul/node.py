"""Per-BS scheduling logic.

A BS computes a *local schedule* every subframe (the number of parent-link
slots it would like, n-hat) and, unless it is a leaf, *final schedules* for
the links to its children. Final schedules are sized by the optimizer, split
into downlink/uplink slots by queue ratio and placed into contiguous slot
windows. Queues count whole packets; one packet fills one data slot.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import InconsistentInputError, InfeasibleError
from .optimizer import (
    LinkEntry,
    ParentReservation,
    ScheduleProblem,
    solve_max_scale,
    solve_max_slots,
)
from .topology import MACRO, TreeTopology

DOWN, UP = "D", "U"


@dataclass
class QueueState:
    """Packet counts keyed by destination (downlink) and by source (uplink)."""

    dl: dict[int, int] = field(default_factory=dict)
    ul: dict[int, int] = field(default_factory=dict)

    def dl_backlog(self, subtree) -> int:
        return sum(self.dl.get(k, 0) for k in subtree)

    def ul_total(self) -> int:
        return sum(self.ul.values())

    def dl_total(self) -> int:
        return sum(self.dl.values())


@dataclass(frozen=True)
class DemandReport:
    """Subtree-aggregated demand in bits per subframe."""

    dl: int = 0
    ul: int = 0

    @property
    def total(self) -> int:
        return self.dl + self.ul

    def __add__(self, other: "DemandReport") -> "DemandReport":
        return DemandReport(self.dl + other.dl, self.ul + other.ul)


@dataclass(frozen=True)
class ChildReport:
    """Slot-1 message from a child: uplink backlog (packets), demand and n-hat."""

    ul_queue: int
    demand: DemandReport
    n_hat: int


def _round_half_up(x: Fraction) -> int:
    return (x.numerator * 2 + x.denominator) // (2 * x.denominator)


@dataclass
class ReportingFilter:
    """Damps n-hat reporting with a sliding-window mean.

    Until the window has filled the raw value is reported; ``prime`` reports
    a raw value without recording it. Afterwards the reported value moves to
    the rounded window mean only when it differs from that mean by more than
    ``threshold`` times the reported value.
    """

    window: int = 4
    threshold: float = 0.5
    history: deque = field(default_factory=deque)
    reported: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        self.history = deque(self.history, maxlen=self.window)

    def update(self, n_hat: int) -> int:
        self.history.append(n_hat)
        if len(self.history) < self.window:
            self.reported = n_hat
            return self.reported
        mean = Fraction(sum(self.history), len(self.history))
        if abs(self.reported - mean) > Fraction(self.threshold) * self.reported:
            self.reported = _round_half_up(mean)
        return self.reported

    def prime(self, n_hat: int) -> int:
        self.reported = n_hat
        return self.reported


def update_report(filt: ReportingFilter, n_hat_now: int) -> int:
    return filt.update(n_hat_now)


@dataclass(frozen=True)
class LinkAllocation:
    """Slots of one logical link in one subframe.

    The link occupies the expanded window ``[start, start + alpha * n_total)``.
    The physical link attached to the parent BS is active on every
    ``alpha``-th slot from the window head; the one attached to the child BS
    on the slots ``alpha - 1`` later.
    """

    link: int
    alpha: int
    n_total: int
    n_down: int
    n_up: int
    start: int
    cap: int

    @property
    def window(self) -> range:
        return range(self.start, self.start + self.alpha * self.n_total)

    def parent_end_slots(self) -> list[int]:
        return [self.start + self.alpha * m for m in range(self.n_total)]

    def child_end_slots(self) -> list[int]:
        return [self.start + self.alpha * m + self.alpha - 1 for m in range(self.n_total)]

    @property
    def slot_set(self) -> list[tuple[int, str]]:
        slots = self.parent_end_slots()
        return [(s, DOWN if m < self.n_down else UP) for m, s in enumerate(slots)]

    def to_dict(self) -> dict:
        return {"link": self.link, "alpha": self.alpha, "n_total": self.n_total, "n_down": self.n_down,
                "n_up": self.n_up, "start": self.start, "cap": self.cap}

    @classmethod
    def from_dict(cls, d: dict) -> "LinkAllocation":
        return cls(**{k: int(d[k]) for k in ("link", "alpha", "n_total", "n_down", "n_up", "start", "cap")})


@dataclass(frozen=True)
class FinalSchedule:
    node: int
    subframe_index: int
    allocations: dict[int, LinkAllocation]
    parent_link: LinkAllocation | None = None
    scale: Fraction = Fraction(1)
    base_slots: int = 0
    solved_slots: int = 0
    repairs: int = 0
    dropped: int = 0

    @property
    def total_slots(self) -> int:
        return sum(a.n_total for a in self.allocations.values())

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "subframe": self.subframe_index,
            "allocations": [self.allocations[k].to_dict() for k in sorted(self.allocations)],
            "parent_link": None if self.parent_link is None else self.parent_link.to_dict(),
            "scale": str(self.scale),
            "base_slots": self.base_slots,
            "solved_slots": self.solved_slots,
            "repairs": self.repairs,
            "dropped": self.dropped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FinalSchedule":
        allocs = [LinkAllocation.from_dict(a) for a in d["allocations"]]
        return cls(
            node=int(d["node"]),
            subframe_index=int(d["subframe"]),
            allocations={a.link: a for a in allocs},
            parent_link=None if d.get("parent_link") is None else LinkAllocation.from_dict(d["parent_link"]),
            scale=Fraction(d.get("scale", "1")),
            base_slots=int(d.get("base_slots", 0)),
            solved_slots=int(d.get("solved_slots", 0)),
            repairs=int(d.get("repairs", 0)),
            dropped=int(d.get("dropped", 0)),
        )


def _pairs_over(topology: TreeTopology, links: list[int]) -> frozenset[tuple[int, int]]:
    return frozenset(
        (a, b)
        for a in range(len(links))
        for b in range(a + 1, len(links))
        if topology.interferes(links[a], links[b])
    )


def _solve_with_fallback(problem: ScheduleProblem, droppable: list[int]):
    """Solve for max scale; while infeasible, deactivate the last live droppable entry."""
    dropped = 0
    while True:
        try:
            return problem, solve_max_scale(problem), dropped
        except InfeasibleError:
            live = problem.live()
            victims = [j for j in droppable if live[j]]
            if not victims:
                raise
            links = list(problem.links)
            e = links[victims[-1]]
            links[victims[-1]] = replace(e, demand=0, queue=None if e.queue is None else 0)
            problem = replace(problem, links=tuple(links))
            dropped += 1


def compute_local_schedule(
    node: int,
    own_demand: DemandReport,
    child_demands: dict[int, DemandReport],
    topology: TreeTopology,
    n_d: int,
) -> tuple[Fraction, int]:
    """Max local scale and the parent-link slot count n-hat supporting it."""
    if node == MACRO:
        raise InconsistentInputError("the macro-cell BS has no parent link to size")
    kids = list(topology.children[node])
    rate = topology.rate_per_slot
    entries = [LinkEntry(demand=child_demands.get(k, DemandReport()).total, upper=n_d, alpha=topology.alpha[k])
               for k in kids]
    total = own_demand.total + sum(child_demands.get(k, DemandReport()).total for k in kids)
    aggregate = LinkEntry(demand=total, upper=n_d, alpha=topology.alpha[node])
    problem = ScheduleProblem(
        links=tuple(entries),
        aggregate=aggregate,
        n_d=n_d,
        radio_budget=n_d * topology.radio_chains[node],
        rate=rate,
        interference=_pairs_over(topology, kids + [node]),
    )
    _, sol, _ = _solve_with_fallback(problem, list(range(len(kids))))
    return sol.scale, sol.aggregate_slots


def split_directions(n_total: int, q_down: int, q_up: int) -> tuple[int, int]:
    """Split a link's slots between directions in proportion to its two backlogs."""
    if n_total < 0 or q_down < 0 or q_up < 0:
        raise InconsistentInputError("slot count and queues must be non-negative")
    if n_total == 0:
        return 0, 0
    total = q_down + q_up
    if total == 0:
        raise InconsistentInputError("slots allocated to a link with empty queues")
    n_down = (2 * n_total * q_down + total) // (2 * total)
    if q_down > 0 and q_up > 0 and n_total >= 2:
        n_down = min(max(n_down, 1), n_total - 1)
    return n_down, n_total - n_down


def place_slots(
    sizes: dict[int, int],
    topology: TreeTopology,
    node: int,
    n_d: int,
    fixed: LinkAllocation | None = None,
) -> tuple[dict[int, tuple[int, int]], int]:
    """First-fit placement of child-link windows at ``node``.

    ``sizes`` maps link id to slot count. Links go in order of decreasing
    expanded length (ties by id), each at the leftmost start where its window
    avoids interfering windows already placed, avoids the parent window when
    it interferes with the parent link, and keeps the per-slot count of
    active attached physical links within the node's radio chains. A link
    that fits nowhere loses one slot and is retried.

    Returns ``{link: (start, n)}`` for links that kept at least one slot, and
    the number of one-slot reductions made.
    """
    cap = topology.radio_chains[node]
    busy = [0] * n_d
    blocked: list[tuple[int, range]] = []
    if fixed is not None and fixed.n_total > 0:
        for s in fixed.child_end_slots():
            busy[s] += 1
        blocked.append((node, fixed.window))

    placed: dict[int, tuple[int, int]] = {}
    repairs = 0
    alpha = topology.alpha
    order = sorted((k for k in sizes if sizes[k] > 0), key=lambda k: (-alpha[k] * sizes[k], k))
    for link in order:
        n = sizes[link]
        a = alpha[link]
        while n > 0:
            start = _first_fit(link, n, a, n_d, cap, busy, blocked, topology)
            if start is not None:
                break
            n -= 1
            repairs += 1
        if n == 0:
            continue
        for m in range(n):
            busy[start + a * m] += 1
        blocked.append((link, range(start, start + a * n)))
        placed[link] = (start, n)
    return placed, repairs


def _first_fit(link, n, a, n_d, cap, busy, blocked, topology):
    length = a * n
    rivals = [w for other, w in blocked if topology.interferes(link, other)]
    for start in range(0, n_d - length + 1):
        end = start + length
        if any(start < w.stop and w.start < end for w in rivals):
            continue
        if all(busy[start + a * m] < cap for m in range(n)):
            return start
    return None


def fill_packets(quota: int, queues: dict[int, int]) -> dict[int, int]:
    """Pick up to ``quota`` packets across queues in proportion to their lengths.

    Largest-remainder apportionment; equal remainders go to the lowest key.
    """
    keys = sorted(k for k, v in queues.items() if v > 0)
    total = sum(queues[k] for k in keys)
    if quota <= 0 or total == 0:
        return {}
    if quota >= total:
        return {k: queues[k] for k in keys}
    take = {k: quota * queues[k] // total for k in keys}
    left = quota - sum(take.values())
    by_rem = sorted(keys, key=lambda k: (-(quota * queues[k] % total), k))
    for k in by_rem[:left]:
        take[k] += 1
    return {k: v for k, v in take.items() if v > 0}


def compute_final_schedule(
    node: int,
    topology: TreeTopology,
    reports: dict[int, ChildReport],
    queues: QueueState,
    n_d: int,
    target: int,
    parent_alloc: LinkAllocation | None = None,
    enhancement: bool = False,
    committed: dict[int, tuple[int, int]] | None = None,
    lead: int = 0,
) -> FinalSchedule:
    """Final valid schedule of ``node``'s child links for one target subframe.

    The macro solves the max-scale problem over its children, optionally
    followed by the slot-maximizing pass. A non-leaf small cell solves the
    same problem with its parent-link reservation ``parent_alloc`` (which may
    be None when the parent gave the link no slots). Children with no report
    get no slots.

    The DL/UL split uses each backlog projected ``lead`` subframes ahead:
    current queue plus reported demand, less the (down, up) slots in
    ``committed`` that earlier schedules already granted the link.
    """
    if topology.is_leaf(node):
        raise InconsistentInputError("leaf BSs do not compute final schedules")
    rate = topology.rate_per_slot
    kids = list(topology.children[node])
    dl_backlog = {k: queues.dl_backlog(topology.subtrees[k]) for k in kids}
    entries = []
    for k in kids:
        rep = reports.get(k)
        if rep is None:
            entries.append(LinkEntry(demand=0, upper=0, alpha=topology.alpha[k], queue=0))
            continue
        backlog = dl_backlog[k] + rep.ul_queue
        entries.append(LinkEntry(demand=rep.demand.total, upper=min(rep.n_hat, n_d),
                                 alpha=topology.alpha[k], queue=backlog * rate))

    budget = n_d * topology.radio_chains[node]
    reservation = None
    if node != MACRO:
        reserved = parent_alloc.n_total if parent_alloc is not None else 0
        budget -= reserved
        reservation = ParentReservation(
            alpha=topology.alpha[node],
            slots=reserved,
            interferes=tuple(topology.interferes(node, k) for k in kids),
        )
    problem = ScheduleProblem(
        links=tuple(entries),
        n_d=n_d,
        radio_budget=max(0, budget),
        rate=rate,
        interference=_pairs_over(topology, kids),
        parent=reservation,
    )
    problem, sol, dropped = _solve_with_fallback(problem, list(range(len(kids))))
    base_slots = sol.objective_slots
    if enhancement:
        sol = solve_max_slots(problem, sol.scale)

    sizes = {k: n for k, n in zip(kids, sol.slots) if n > 0}
    fixed = parent_alloc if node != MACRO else None
    placed, repairs = place_slots(sizes, topology, node, n_d, fixed)

    allocations = {}
    committed = committed or {}
    for k, (start, n) in placed.items():
        rep = reports[k]
        c_down, c_up = committed.get(k, (0, 0))
        q_down = max(0, (dl_backlog[k] - c_down) * rate + lead * rep.demand.dl)
        q_up = max(0, (rep.ul_queue - c_up) * rate + lead * rep.demand.ul)
        if q_down + q_up == 0:
            q_down, q_up = dl_backlog[k], rep.ul_queue
        n_down, n_up = split_directions(n, q_down, q_up)
        allocations[k] = LinkAllocation(
            link=k, alpha=topology.alpha[k], n_total=n, n_down=n_down, n_up=n_up, start=start,
            cap=min(reports[k].n_hat, n_d),
        )
    return FinalSchedule(
        node=node,
        subframe_index=target,
        allocations=allocations,
        parent_link=fixed,
        scale=sol.scale,
        base_slots=base_slots,
        solved_slots=sol.objective_slots,
        repairs=repairs,
        dropped=dropped,
    )


def compute_final_schedule_macro(topology, reports, queues, n_d, target, enhancement=True) -> FinalSchedule:
    return compute_final_schedule(MACRO, topology, reports, queues, n_d, target, None, enhancement)


def compute_final_schedule_nonleaf(node, topology, parent_final: FinalSchedule | None, reports, queues, n_d,
                                   target) -> FinalSchedule | None:
    """Schedule for a non-leaf small cell; None when the parent's schedule for the target is absent."""
    if parent_final is None or parent_final.subframe_index != target:
        return None
    return compute_final_schedule(node, topology, reports, queues, n_d, target,
                                  parent_final.allocations.get(node), enhancement=False)


class BaseStation:
    """State owned by one BS: queues, filter, received reports and schedules."""

    def __init__(self, ident: int, topology: TreeTopology, n_d: int, window: int = 4,
                 threshold: float = 0.5, enhancement: bool = True):
        self.ident = ident
        self.topology = topology
        self.n_d = n_d
        self.enhancement = enhancement
        self.queues = QueueState()
        self.filter = ReportingFilter(window, threshold)
        self.child_reports: dict[int, ChildReport] = {}
        self.parent_schedules: dict[int, FinalSchedule] = {}
        self.schedules: dict[int, FinalSchedule] = {}
        self.own_demand = DemandReport()
        self.last_scale = Fraction(1)
        self.raw_n_hat = 0

    @property
    def is_macro(self) -> bool:
        return self.ident == MACRO

    @property
    def is_leaf(self) -> bool:
        return self.topology.is_leaf(self.ident)

    def local_step(self, settled: bool = True) -> ChildReport:
        """Slot 1: size the parent link from demand and build the upward report.

        Before ``settled`` the raw n-hat is reported and kept out of the filter
        window, since subtree demand is still propagating upward.
        """
        kids = self.topology.children[self.ident]
        demands = {k: self.child_reports[k].demand for k in kids if k in self.child_reports}
        self.last_scale, self.raw_n_hat = compute_local_schedule(
            self.ident, self.own_demand, demands, self.topology, self.n_d)
        reported = self.filter.update(self.raw_n_hat) if settled else self.filter.prime(self.raw_n_hat)
        subtree_demand = self.own_demand
        for d in demands.values():
            subtree_demand = subtree_demand + d
        return ChildReport(ul_queue=self.queues.ul_total(), demand=subtree_demand, n_hat=reported)

    def final_step(self, target: int, now: int | None = None) -> FinalSchedule | None:
        """Slot 2: final schedule for ``target``; None when the parent schedule is missing.

        ``now`` is the current subframe; schedules already computed for
        ``now .. target-1`` count as committed when splitting directions.
        """
        lead = 0 if now is None else max(0, target - now)
        committed: dict[int, tuple[int, int]] = {}
        for t in range(target - lead, target):
            sched = self.schedules.get(t)
            if sched is None:
                continue
            for k, a in sched.allocations.items():
                d, u = committed.get(k, (0, 0))
                committed[k] = (d + a.n_down, u + a.n_up)
        if self.is_macro:
            sched = compute_final_schedule(MACRO, self.topology, self.child_reports, self.queues, self.n_d,
                                           target, None, self.enhancement, committed, lead)
        else:
            parent_final = self.parent_schedules.get(target)
            if parent_final is None:
                return None
            sched = compute_final_schedule(self.ident, self.topology, self.child_reports, self.queues, self.n_d,
                                           target, parent_final.allocations.get(self.ident), False, committed, lead)
        self.schedules[target] = sched
        return sched

    def forget_before(self, subframe: int) -> None:
        for store in (self.parent_schedules, self.schedules):
            for t in [t for t in store if t < subframe]:
                del store[t]
