"""Discrete-time simulation core.

Each subframe runs strictly in order:

1. control slot 1: every small cell sizes its parent link and reports
   demand, uplink backlog and n-hat to its parent;
2. control slot 2: every non-leaf BS that holds its parent's schedule for
   its target subframe computes a final schedule and sends it to its children;
3. data slots: the schedules for the current subframe move packets;
4. new traffic is queued and a MetricsRecord is appended.

With a per-flow buffer limit, every per-flow queue is bounded: a hop only
forwards packets its next-hop queue has room for, and arrivals that find the
source queue full are dropped.

Messages sent in a control slot are delivered at the end of that slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BackhaulError, ConfigError
from .metrics import MetricsRecord
from .node import BaseStation, ChildReport, DemandReport, FinalSchedule, fill_packets
from .topology import MACRO, TreeTopology
from .traffic import ArrivalModel, DemandProfile, arrivals_for

CONTROL_SLOTS = 2


class PipelineViolation(BackhaulError, AssertionError):
    """A happen-before or control-slot rule was broken during a run."""


class NotSchedulingYet(BackhaulError):
    pass


@dataclass(frozen=True)
class SubframeClock:
    slots_per_subframe: int = 24
    data_slots: int = 22
    subframe_duration: float = 1e-4
    control_slots: int = CONTROL_SLOTS

    def __post_init__(self):
        if self.control_slots + self.data_slots != self.slots_per_subframe:
            raise ConfigError("data_slots", "control slots plus data slots must equal slots per subframe")
        if self.data_slots < 1:
            raise ConfigError("data_slots", "need at least one data slot")
        if self.subframe_duration <= 0:
            raise ConfigError("subframe_duration", "must be positive")

    @property
    def slot_duration(self) -> float:
        return self.subframe_duration / self.slots_per_subframe


@dataclass(frozen=True)
class ControlMessage:
    sender: int
    receiver: int
    subframe: int
    control_slot: int
    sub_slot: int
    payload: ChildReport | tuple[FinalSchedule, ...]


def assign_sub_slots(topology: TreeTopology, n_sub: int) -> dict[tuple[int, int], int]:
    """Unique sub-slot per child under each parent, in child-id order."""
    out = {}
    for parent in topology.nodes:
        kids = sorted(topology.children[parent])
        if len(kids) > n_sub:
            raise ConfigError("n_sub", f"node {parent} has {len(kids)} children but only {n_sub} sub-slots")
        for slot, child in enumerate(kids):
            out[(parent, child)] = slot
    return out


def start_subframe(height: int, depth: int) -> int:
    return depth - height + 1


def target_subframe(height: int, subframe: int, depth: int) -> int | list[int]:
    """Subframe(s) a BS of the given height schedules during ``subframe``.

    The first scheduling subframe covers every target up to the tree depth;
    later ones add the next unscheduled subframe only.
    """
    if height < 2:
        raise NotSchedulingYet("leaf BSs never compute final schedules")
    first = start_subframe(height, depth)
    if subframe < first:
        raise NotSchedulingYet(f"height {height} starts scheduling in subframe {first}")
    if subframe == first:
        return list(range(first, depth + 1))
    return subframe + height - 1


@dataclass
class PipelineLog:
    """Which node computed which target when, for post-run checks."""

    computed: dict[tuple[int, int], int] = field(default_factory=dict)
    received: dict[tuple[int, int], int] = field(default_factory=dict)
    idle: list[tuple[int, int, int]] = field(default_factory=list)
    single_target: dict[int, bool] = field(default_factory=dict)

    def stable_from(self) -> int | None:
        """First subframe from which every non-leaf BS computes exactly one target."""
        first = None
        for s in sorted(self.single_target):
            if self.single_target[s]:
                first = s if first is None else first
            else:
                first = None
        return first


class Engine:
    """Runs one scenario subframe by subframe. Single-threaded and deterministic."""

    def __init__(
        self,
        topology: TreeTopology,
        profile: DemandProfile,
        clock: SubframeClock = SubframeClock(),
        arrivals: ArrivalModel | None = None,
        window: int = 4,
        threshold: float = 0.5,
        enhancement: bool = True,
        n_sub: int = 8,
        keep_schedules: bool = False,
        flow_buffer: int | None = None,
    ):
        self.topology = topology
        self.profile = profile
        self.clock = clock
        self.arrivals = arrivals or ArrivalModel(topology.rate_per_slot)
        self.n_d = clock.data_slots
        self.sub_slots = assign_sub_slots(topology, n_sub)
        self.n_sub = n_sub
        self.stations = [
            BaseStation(i, topology, self.n_d, window, threshold, enhancement) for i in topology.nodes
        ]
        self.subframe = 0
        self.records: list[MetricsRecord] = []
        self.pipeline = PipelineLog()
        self.keep_schedules = keep_schedules
        self.schedule_log: list[FinalSchedule] = []
        self.flow_buffer = flow_buffer
        self.generated_bits = 0
        self.delivered_bits = 0
        self.dropped_bits = 0
        # schedulers in a fixed order: deepest responsibility first
        self._schedulers = sorted(
            (i for i in topology.nodes if not topology.is_leaf(i)), key=lambda i: (-topology.heights[i], i)
        )

    @property
    def depth(self) -> int:
        return self.topology.depth

    def _deliver(self, messages: list[ControlMessage]) -> None:
        per_parent: dict[tuple[int, int], set[int]] = {}
        for msg in messages:
            parent = msg.receiver if msg.control_slot == 1 else msg.sender
            child = msg.sender if msg.control_slot == 1 else msg.receiver
            if msg.sub_slot != self.sub_slots[(parent, child)]:
                raise PipelineViolation(f"message {parent}<->{child} used the wrong sub-slot")
            used = per_parent.setdefault((parent, msg.control_slot), set())
            if msg.sub_slot in used or len(used) >= self.n_sub:
                raise PipelineViolation(f"control slot {msg.control_slot} of node {parent} over capacity")
            used.add(msg.sub_slot)
            receiver = self.stations[msg.receiver]
            if isinstance(msg.payload, ChildReport):
                receiver.child_reports[msg.sender] = msg.payload
            else:
                for sched in msg.payload:
                    receiver.parent_schedules[sched.subframe_index] = sched
                    self.pipeline.received[(msg.receiver, sched.subframe_index)] = msg.subframe

    def _control_slot_1(self, s: int) -> None:
        messages = []
        for i in self.topology.small_cells:
            st = self.stations[i]
            dl, ul = self.profile.rates(i, s)
            st.own_demand = DemandReport(dl, ul)
            report = st.local_step(settled=s >= self.depth)
            parent = self.topology.parents[i]
            messages.append(ControlMessage(i, parent, s, 1, self.sub_slots[(parent, i)], report))
        self._deliver(messages)

    def _control_slot_2(self, s: int) -> list[FinalSchedule]:
        messages, computed = [], []
        single = True
        for i in self._schedulers:
            h = self.topology.heights[i]
            try:
                targets = target_subframe(h, s, self.depth)
            except NotSchedulingYet:
                single = False
                continue
            if isinstance(targets, list):
                single = single and len(targets) == 1
            else:
                targets = [targets]
            out = []
            for t in targets:
                if i != MACRO:
                    got = self.pipeline.received.get((i, t))
                    if got is not None and got >= s:
                        raise PipelineViolation(f"node {i} saw its parent's schedule for {t} too early")
                sched = self.stations[i].final_step(t, now=s)
                if sched is None:
                    self.pipeline.idle.append((i, t, s))
                    continue
                if i != MACRO and (i, t) not in self.pipeline.received:
                    raise PipelineViolation(f"node {i} scheduled {t} without its parent's schedule")
                self.pipeline.computed[(i, t)] = s
                out.append(sched)
            computed.extend(out)
            if out:
                for child in self.topology.children[i]:
                    messages.append(ControlMessage(i, child, s, 2, self.sub_slots[(i, child)], tuple(out)))
        self.pipeline.single_target[s] = single
        self._deliver(messages)
        return computed

    def _data_phase(self, s: int, dl_bits: list[int], ul_bits: list[int]) -> None:
        rate = self.topology.rate_per_slot
        moves = []
        for p in self._schedulers:
            sched = self.stations[p].schedules.get(s)
            if sched is None:
                continue
            for link, alloc in sorted(sched.allocations.items()):
                sub = self.topology.subtrees[link]
                parent_q = self.stations[p].queues
                child_q = self.stations[link].queues
                dl_ready = {k: self._sendable(v, child_q.dl, k, k == link) for k, v in parent_q.dl.items() if k in sub}
                ul_ready = {k: self._sendable(v, parent_q.ul, k, p == MACRO) for k, v in child_q.ul.items()}
                dl_take = fill_packets(alloc.n_down, dl_ready)
                ul_take = fill_packets(alloc.n_up, ul_ready)
                moves.append((p, link, dl_take, ul_take))
        for p, link, dl_take, ul_take in moves:
            pq, cq = self.stations[p].queues, self.stations[link].queues
            for k, c in dl_take.items():
                pq.dl[k] -= c
                if k == link:
                    dl_bits[k] += c * rate
                else:
                    cq.dl[k] = cq.dl.get(k, 0) + c
            for k, c in ul_take.items():
                cq.ul[k] -= c
                if p == MACRO:
                    ul_bits[k] += c * rate
                else:
                    pq.ul[k] = pq.ul.get(k, 0) + c

    def _sendable(self, held: int, receiver: dict[int, int], key: int, terminal: bool) -> int:
        """Packets of one flow a hop may carry: backpressure from a full next-hop queue."""
        if terminal or self.flow_buffer is None:
            return held
        return max(0, min(held, self.flow_buffer - receiver.get(key, 0)))

    def _admit(self, queue: dict[int, int], key: int, packets: int) -> int:
        """Tail-drop at a source queue; returns the packets dropped."""
        held = queue.get(key, 0)
        room = packets if self.flow_buffer is None else max(0, min(packets, self.flow_buffer - held))
        if room:
            queue[key] = held + room
        return packets - room

    def _arrivals(self, s: int) -> list[int]:
        macro = self.stations[MACRO].queues
        rate = self.topology.rate_per_slot
        drops = [0] * self.topology.num_nodes
        for i in self.topology.small_cells:
            dl, ul = arrivals_for(self.profile, i, s, self.arrivals)
            drops[i] = self._admit(macro.dl, i, dl) + self._admit(self.stations[i].queues.ul, i, ul)
            self.generated_bits += (dl + ul) * rate
            self.dropped_bits += drops[i] * rate
        return drops

    def run_subframe(self) -> MetricsRecord:
        s = self.subframe + 1
        self.subframe = s
        self._control_slot_1(s)
        computed = self._control_slot_2(s)
        if self.keep_schedules:
            self.schedule_log.extend(computed)

        n = self.topology.num_nodes
        dl_bits, ul_bits = [0] * n, [0] * n
        self._data_phase(s, dl_bits, ul_bits)
        drops = self._arrivals(s)
        self.delivered_bits += sum(dl_bits) + sum(ul_bits)

        macro_scheds = [c for c in computed if c.node == MACRO]
        last_macro = macro_scheds[-1] if macro_scheds else None
        record = MetricsRecord(
            subframe=s,
            dl_bits=tuple(dl_bits),
            ul_bits=tuple(ul_bits),
            dl_queue=tuple(st.queues.dl_total() for st in self.stations),
            ul_queue=tuple(st.queues.ul_total() for st in self.stations),
            n_hat=tuple(0 if st.is_macro else st.filter.reported for st in self.stations),
            placement_repairs=sum(c.repairs for c in computed),
            dropped_links=sum(c.dropped for c in computed),
            macro_base_slots=None if last_macro is None else last_macro.base_slots,
            macro_slots=None if last_macro is None else last_macro.solved_slots,
            dropped_packets=tuple(drops),
        )
        self.records.append(record)
        for st in self.stations:
            st.forget_before(s)
        return record

    def run(self, num_subframes: int) -> list[MetricsRecord]:
        for _ in range(num_subframes):
            self.run_subframe()
        return self.records

    def check_pipeline(self) -> list[str]:
        """Post-run audit of happen-before and parent/child target consistency."""
        problems = []
        topo = self.topology
        for (node, t), s in self.pipeline.computed.items():
            if node == MACRO:
                continue
            parent = topo.parents[node]
            ps = self.pipeline.computed.get((parent, t))
            if ps is None or ps >= s:
                problems.append(f"node {node} target {t} at {s}: parent computed it at {ps}")
        for (node, t), s in self.pipeline.computed.items():
            if node == MACRO or s == start_subframe(topo.heights[node], self.depth):
                continue
            parent = topo.parents[node]
            lag = topo.heights[parent] - topo.heights[node]
            expected = target_subframe(topo.heights[parent], s - lag, self.depth)
            if isinstance(expected, list):
                if t not in expected:
                    problems.append(f"node {node} target {t} not among parent's first batch")
            elif expected != t:
                problems.append(f"node {node} target {t} but parent targeted {expected} at {s - lag}")
        return problems
