"""Brute-force capacity estimate for equal per-BS demand.

With every small cell offering the same load, link ``L_j`` must carry
``|subtree(j)|`` times that load. The largest load for which every BS can
give each attached link ``ceil(load * |subtree| / r)`` slots in every
subframe is the minimum, over BSs, of the largest scale the BS's own
slot-allocation problem admits. Each per-BS problem is solved by exhaustive
enumeration (or by the breakpoint solver for BSs too large to enumerate).
"""

from __future__ import annotations

from fractions import Fraction

from .optimizer import LinkEntry, ScheduleProblem, oracle_enumerate, solve_max_scale, ORACLE_LIMIT
from .topology import MACRO, TreeTopology


def node_problem(topology: TreeTopology, node: int, n_d: int, unit: int) -> ScheduleProblem:
    """Slot problem at ``node`` when every small cell offers ``unit`` bits per subframe."""
    kids = list(topology.children[node])
    size = [len(s) for s in topology.subtrees]
    links = tuple(LinkEntry(demand=size[k] * unit, upper=n_d, alpha=topology.alpha[k]) for k in kids)
    aggregate = None
    attached = kids
    if node != MACRO:
        aggregate = LinkEntry(demand=size[node] * unit, upper=n_d, alpha=topology.alpha[node])
        attached = kids + [node]
    pairs = frozenset(
        (a, b) for a in range(len(attached)) for b in range(a + 1, len(attached))
        if topology.interferes(attached[a], attached[b])
    )
    return ScheduleProblem(links=links, aggregate=aggregate, n_d=n_d,
                           radio_budget=n_d * topology.radio_chains[node],
                           rate=topology.rate_per_slot, interference=pairs)


def capacity_estimate(topology: TreeTopology, n_d: int, method: str = "oracle") -> Fraction:
    """Largest equal per-BS load, in packets (slot payloads) per subframe.

    ``method`` is ``"oracle"`` (enumeration, falling back to the solver when a
    BS has too many vectors) or ``"solver"``.
    """
    r = topology.rate_per_slot
    # reference load large enough that every per-BS scale stays below one
    unit = n_d * r
    best = None
    for node in topology.nodes:
        problem = node_problem(topology, node, n_d, unit)
        if method == "oracle" and _grid_size(problem) <= ORACLE_LIMIT:
            scale = oracle_enumerate(problem).scale
        else:
            scale = solve_max_scale(problem).scale
        load = scale * n_d
        best = load if best is None else min(best, load)
    return best


def _grid_size(problem: ScheduleProblem) -> int:
    size = 1
    for e in problem.entries:
        size *= e.upper + 1
    return size


def capacity_bps(topology: TreeTopology, n_d: int, subframe_duration: float, method: str = "oracle") -> float:
    return float(capacity_estimate(topology, n_d, method)) * topology.rate_per_slot / subframe_duration
