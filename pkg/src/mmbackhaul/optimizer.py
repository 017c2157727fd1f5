"""Exact solvers for the small slot-allocation integer programs.

Every program has the same shape: one integer slot count ``n_j`` per link
entry and a scale ``S`` in [0, 1] such that ``n_j * r >= S * load_j``. A link
is *live* when it has something to carry (positive queue, or positive demand
for queue-less local problems) and at least one slot fits under its own
bounds; live links take at least one slot, others take none.

Constraints shared by all four programs:

* ``1 <= n_j <= min(upper_j, n_d // alpha_j)`` for live links;
* ``alpha_j n_j + alpha_k n_k <= n_d`` for every interfering pair;
* ``alpha_k n_k <= n_d - alpha_p * reserved`` when link k interferes with
  the already-scheduled parent link;
* ``sum(n) <= radio_budget``.

All arithmetic is on integers (bits and slots), so the optimal scale is an
exact rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import InconsistentInputError, InfeasibleError, OracleOverflowError

ORACLE_LIMIT = 10**7


@dataclass(frozen=True)
class LinkEntry:
    """One decision variable.

    ``demand`` is D_j in bits per subframe. ``queue`` is Q_j in bits, or None
    for local-schedule problems where only demand matters. ``upper`` is the
    slot cap (n_d for local problems, the child's reported n-hat otherwise).
    """

    demand: int
    upper: int
    alpha: int = 1
    queue: int | None = None

    @property
    def load(self) -> int:
        return self.demand if self.queue is None else min(self.queue, self.demand)

    @property
    def active(self) -> bool:
        return self.demand > 0 if self.queue is None else self.queue > 0


@dataclass(frozen=True)
class ParentReservation:
    """Parent-link slots already fixed by the parent BS (non-leaf small cells)."""

    alpha: int
    slots: int
    interferes: tuple[bool, ...]


@dataclass(frozen=True)
class ScheduleProblem:
    """Slot-allocation problem at one BS.

    Entries are ``links`` followed by ``aggregate`` when given (the parent
    link of a local-schedule problem). ``interference`` holds index pairs
    ``(j, k)`` with ``j < k`` over those entries.
    """

    links: tuple[LinkEntry, ...]
    n_d: int
    radio_budget: int
    rate: int = 1
    interference: frozenset[tuple[int, int]] = frozenset()
    aggregate: LinkEntry | None = None
    parent: ParentReservation | None = None

    def __post_init__(self):
        if self.n_d < 1:
            raise InconsistentInputError("n_d must be at least 1")
        if self.rate < 1:
            raise InconsistentInputError("rate must be a positive number of bits per slot")
        for e in self.entries:
            if e.demand < 0 or (e.queue is not None and e.queue < 0):
                raise InconsistentInputError("demands and queues must be non-negative")
            if not 0 <= e.upper <= self.n_d:
                raise InconsistentInputError(f"upper bound {e.upper} outside [0, n_d]")
            if e.alpha not in (1, 2):
                raise InconsistentInputError(f"alpha must be 1 or 2, got {e.alpha}")
        m = len(self.entries)
        for j, k in self.interference:
            if not 0 <= j < k < m:
                raise InconsistentInputError(f"bad interference pair {(j, k)}")
        if self.parent is not None and len(self.parent.interferes) != m:
            raise InconsistentInputError("parent reservation needs one interference flag per entry")

    @property
    def entries(self) -> tuple[LinkEntry, ...]:
        return self.links + ((self.aggregate,) if self.aggregate is not None else ())

    def caps(self) -> tuple[int, ...]:
        out = []
        for j, e in enumerate(self.entries):
            cap = min(e.upper, self.n_d // e.alpha)
            if self.parent is not None and self.parent.interferes[j]:
                cap = min(cap, max(0, self.n_d - self.parent.alpha * self.parent.slots) // e.alpha)
            out.append(cap)
        return tuple(out)

    def live(self) -> tuple[bool, ...]:
        return tuple(e.active and c >= 1 for e, c in zip(self.entries, self.caps()))


@dataclass(frozen=True)
class ScheduleSolution:
    scale: Fraction
    slots: tuple[int, ...]
    best_slots: tuple[int, ...] | None = field(default=None, compare=False)

    @property
    def objective_slots(self) -> int:
        return sum(self.slots)

    @property
    def aggregate_slots(self) -> int:
        return self.slots[-1]


def _required(p: int, q: int, load: int, rate: int) -> int:
    # ceil(S * load / rate) with S = p / q, at least one slot
    return max(1, -(-(p * load) // (q * rate)))


class _Prepared:
    __slots__ = ("m", "alpha", "caps", "live", "loads", "pairs", "budget", "n_d", "rate", "partners")

    def __init__(self, problem: ScheduleProblem):
        entries = problem.entries
        self.m = len(entries)
        self.alpha = [e.alpha for e in entries]
        self.caps = list(problem.caps())
        self.live = list(problem.live())
        self.loads = [e.load for e in entries]
        self.pairs = sorted(problem.interference)
        self.budget = problem.radio_budget
        self.n_d = problem.n_d
        self.rate = problem.rate
        self.partners: list[list[int]] = [[] for _ in range(self.m)]
        for j, k in self.pairs:
            self.partners[j].append(k)
            self.partners[k].append(j)

    def packs(self, n: list[int]) -> bool:
        if sum(n) > self.budget:
            return False
        a = self.alpha
        return all(a[j] * n[j] + a[k] * n[k] <= self.n_d for j, k in self.pairs)

    def minimal(self, p: int, q: int) -> list[int] | None:
        n = []
        for j in range(self.m):
            if not self.live[j]:
                n.append(0)
                continue
            req = _required(p, q, self.loads[j], self.rate)
            if req > self.caps[j]:
                return None
            n.append(req)
        return n if self.packs(n) else None


@lru_cache(maxsize=8192)
def solve_max_scale(problem: ScheduleProblem) -> ScheduleSolution:
    """Largest scale S in [0, 1] with a feasible slot vector, plus its minimal witness.

    Feasibility is monotone in S and only changes where some ``ceil(S *
    load_j / r)`` steps, so the optimum is the largest feasible breakpoint
    ``n * r / load_j`` (or 1). Raises InfeasibleError when even one slot per
    live link cannot be packed.
    """
    prep = _Prepared(problem)
    floor_vec = [1 if lv else 0 for lv in prep.live]
    if not prep.packs(floor_vec):
        raise InfeasibleError("live links cannot all receive one slot")

    cands: list[tuple[float, int, int]] = [(1.0, 1, 1)]
    for j in range(prep.m):
        load = prep.loads[j]
        if not prep.live[j] or load == 0:
            continue
        for n in range(1, prep.caps[j] + 1):
            p = n * prep.rate
            if p >= load:
                break
            cands.append((p / load, p, load))
    cands.sort()
    cands = _exact_ties(cands)

    # cands[0] is always feasible: at the smallest breakpoint every live link needs one slot
    lo, hi = 0, len(cands) - 1
    if prep.minimal(cands[hi][1], cands[hi][2]) is not None:
        lo = hi
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if prep.minimal(cands[mid][1], cands[mid][2]) is not None:
                lo = mid
            else:
                hi = mid
    _, p, q = cands[lo]
    witness = prep.minimal(p, q)
    if witness is None:
        raise InfeasibleError("no feasible scale")  # unreachable when floor_vec packs
    return ScheduleSolution(Fraction(p, q), tuple(witness))


def _exact_ties(cands):
    # floats of distinct rationals can collide; order each colliding run exactly
    out, i = [], 0
    while i < len(cands):
        j = i + 1
        while j < len(cands) and cands[j][0] == cands[i][0]:
            j += 1
        run = cands[i:j]
        if len(run) > 1:
            run = sorted(run, key=lambda c: Fraction(c[1], c[2]))
        out.extend(run)
        i = j
    return out


@lru_cache(maxsize=8192)
def solve_max_slots(problem: ScheduleProblem, scale: Fraction) -> ScheduleSolution:
    """Maximize the total slot count while every live link keeps ``n_j r >= scale * load_j``.

    Depth-first branch and bound in link-index order with ascending values,
    seeded by a greedy fill; among equal totals the lexicographically
    smallest vector wins.
    """
    scale = Fraction(scale)
    if not 0 <= scale <= 1:
        raise InconsistentInputError(f"scale {scale} outside [0, 1]")
    prep = _Prepared(problem)
    p, q = scale.numerator, scale.denominator
    if p == 0:
        p, q = 0, 1
    lower = prep.minimal(p, q)
    if lower is None:
        raise InconsistentInputError(f"scale {scale} is not feasible for this problem")
    upper = [prep.caps[j] if prep.live[j] else 0 for j in range(prep.m)]
    alpha, n_d, budget, partners = prep.alpha, prep.n_d, prep.budget, prep.partners

    greedy = list(lower)
    used = sum(greedy)
    for j in range(prep.m):
        room = upper[j]
        for k in partners[j]:
            room = min(room, (n_d - alpha[k] * greedy[k]) // alpha[j])
        room = min(room, greedy[j] + budget - used)
        if room > greedy[j]:
            used += room - greedy[j]
            greedy[j] = room

    best_sum = sum(greedy) - 1
    best: list[int] = []
    n = [0] * prep.m

    def remaining_bound(d: int, used: int) -> int:
        total = 0
        for k in range(d, prep.m):
            ub = upper[k]
            for o in partners[k]:
                if o < d:
                    ub = min(ub, (n_d - alpha[o] * n[o]) // alpha[k])
            if ub < lower[k]:
                return -1
            total += ub
        return min(total, budget - used)

    def dfs(d: int, used: int) -> None:
        nonlocal best_sum, best
        if d == prep.m:
            if used > best_sum:
                best_sum, best = used, list(n)
            return
        ub = upper[d]
        for o in partners[d]:
            if o < d:
                ub = min(ub, (n_d - alpha[o] * n[o]) // alpha[d])
        ub = min(ub, budget - used)
        for v in range(lower[d], ub + 1):
            n[d] = v
            rest = remaining_bound(d + 1, used + v)
            if rest < 0:
                continue
            if used + v + rest <= best_sum:
                continue
            dfs(d + 1, used + v)
        n[d] = 0

    dfs(0, 0)
    if not best:
        best = greedy
    return ScheduleSolution(scale, tuple(best))


def oracle_enumerate(problem: ScheduleProblem) -> ScheduleSolution:
    """Ground truth by exhaustive enumeration of every slot vector.

    Returns the maximal scale with its componentwise-minimal witness in
    ``slots`` and the lexicographically smallest slot-maximizing vector at
    that scale in ``best_slots``. Independent of the breakpoint and
    branch-and-bound code paths; intended for tests and small instances.
    """
    entries = problem.entries
    m = len(entries)
    shape = tuple(e.upper + 1 for e in entries)
    size = math.prod(shape)
    if size > ORACLE_LIMIT:
        raise OracleOverflowError(f"{size} vectors exceeds the oracle limit of {ORACLE_LIMIT}")

    grid = np.indices(shape, dtype=np.int64).reshape(m, -1)
    n_d = problem.n_d
    ok = np.ones(grid.shape[1], dtype=bool)
    live = []
    for j, e in enumerate(entries):
        col = grid[j]
        # a link is live when it has traffic and a single slot passes its own bounds
        one_fits = e.upper >= 1 and e.alpha <= n_d
        if problem.parent is not None and problem.parent.interferes[j]:
            one_fits = one_fits and e.alpha <= n_d - problem.parent.alpha * problem.parent.slots
        is_live = e.active and one_fits
        live.append(is_live)
        if not is_live:
            ok &= col == 0
            continue
        ok &= (col >= 1) & (e.alpha * col <= n_d)
        if problem.parent is not None and problem.parent.interferes[j]:
            ok &= e.alpha * col <= n_d - problem.parent.alpha * problem.parent.slots
    for j, k in problem.interference:
        ok &= entries[j].alpha * grid[j] + entries[k].alpha * grid[k] <= n_d
    ok &= grid.sum(axis=0) <= problem.radio_budget

    feasible = grid[:, ok]
    if feasible.shape[1] == 0:
        raise InfeasibleError("no feasible slot vector")

    rate = problem.rate
    scaled = [j for j in range(m) if live[j] and entries[j].load > 0]
    if scaled:
        ratios = np.stack([feasible[j] * rate / entries[j].load for j in scaled])
        s_float = np.minimum(ratios.min(axis=0), 1.0)
        near = s_float >= s_float.max() - 1e-9
        # resolve the top group exactly
        exact = set()
        for col in np.flatnonzero(near):
            vals = [Fraction(int(feasible[j, col]) * rate, entries[j].load) for j in scaled]
            exact.add(min(min(vals), Fraction(1)))
        s_star = max(exact)
        p, q = s_star.numerator, s_star.denominator
        meets = np.ones(feasible.shape[1], dtype=bool)
        for j in scaled:
            load = entries[j].load
            meets &= np.array([int(v) * rate * q >= p * load for v in feasible[j]], dtype=bool) \
                if p * load > 2**62 else feasible[j] * rate * q >= p * load
    else:
        s_star = Fraction(1)
        meets = np.ones(feasible.shape[1], dtype=bool)

    at_scale = feasible[:, meets]
    sums = at_scale.sum(axis=0)
    minimal = _lex_first(at_scale[:, sums == sums.min()])
    best = _lex_first(at_scale[:, sums == sums.max()])
    return ScheduleSolution(s_star, minimal, best_slots=best)


def _lex_first(cols: np.ndarray) -> tuple[int, ...]:
    order = np.lexsort(cols[::-1])
    return tuple(int(v) for v in cols[:, order[0]])


def pairs_from_matrix(matrix) -> frozenset[tuple[int, int]]:
    """Index pairs of a symmetric 0/1 matrix."""
    mat = np.asarray(matrix)
    return frozenset((j, k) for j, k in combinations(range(mat.shape[0]), 2) if mat[j, k])
