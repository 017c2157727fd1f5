from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmbackhaul import (
    InconsistentInputError,
    InfeasibleError,
    LinkEntry,
    OracleOverflowError,
    ParentReservation,
    ScheduleProblem,
    oracle_enumerate,
    solve_max_scale,
    solve_max_slots,
)


def feasible(problem: ScheduleProblem, n, scale) -> bool:
    """Independent constraint check of a slot vector at a given scale."""
    entries = problem.entries
    for j, (e, v) in enumerate(zip(entries, n)):
        limit = problem.n_d
        if problem.parent is not None and problem.parent.interferes[j]:
            limit -= problem.parent.alpha * problem.parent.slots
        fits = e.upper >= 1 and e.alpha <= limit
        if not (e.active and fits):
            if v != 0:
                return False
            continue
        if not (1 <= v <= e.upper and e.alpha * v <= limit):
            return False
        if v * problem.rate < scale * e.load:
            return False
    for j, k in problem.interference:
        if entries[j].alpha * n[j] + entries[k].alpha * n[k] > problem.n_d:
            return False
    return sum(n) <= problem.radio_budget


def test_all_zero_demand():
    p = ScheduleProblem(links=(LinkEntry(0, 22), LinkEntry(0, 22)), n_d=22, radio_budget=22)
    sol = solve_max_scale(p)
    assert sol.scale == 1
    assert sol.slots == (0, 0)


def test_local_schedule_example():
    p = ScheduleProblem(links=(LinkEntry(10, 22),), aggregate=LinkEntry(11, 22), n_d=22, radio_budget=22)
    sol = solve_max_scale(p)
    assert sol.scale == 1
    assert sol.slots == (10, 11)
    assert oracle_enumerate(p).scale == 1


def test_interfering_children_example():
    p = ScheduleProblem(
        links=(LinkEntry(22, 22), LinkEntry(22, 22)),
        aggregate=LinkEntry(44, 22),
        n_d=22,
        radio_budget=44,
        interference=frozenset({(0, 1)}),
    )
    sol = solve_max_scale(p)
    assert sol.scale == Fraction(1, 2)
    assert sol.slots == (11, 11, 22)
    assert oracle_enumerate(p).scale == Fraction(1, 2)


def test_exact_fit_oracle():
    p = ScheduleProblem(links=(LinkEntry(22 * 7, 22),), n_d=22, radio_budget=22, rate=7)
    sol = oracle_enumerate(p)
    assert sol.scale == 1 and sol.slots == (22,)


def test_infeasible_clique():
    # three live links, one slot each, but only two slots of radio budget
    p = ScheduleProblem(links=(LinkEntry(5, 4),) * 3, n_d=4, radio_budget=2)
    with pytest.raises(InfeasibleError):
        solve_max_scale(p)


def test_max_slots_fills_to_cap():
    p = ScheduleProblem(links=(LinkEntry(3, 8, queue=3),), n_d=22, radio_budget=22)
    assert solve_max_slots(p, Fraction(1)).slots == (8,)


def test_max_slots_radio_budget():
    p = ScheduleProblem(links=(LinkEntry(2, 10, queue=2), LinkEntry(2, 10, queue=2)), n_d=22, radio_budget=15)
    sol = solve_max_slots(p, Fraction(1))
    assert sol.objective_slots == 15
    assert sol.slots == (5, 10)


def test_max_slots_interfering_pair():
    p = ScheduleProblem(links=(LinkEntry(1, 20, queue=1), LinkEntry(1, 20, queue=1)), n_d=22, radio_budget=44,
                        interference=frozenset({(0, 1)}))
    sol = solve_max_slots(p, Fraction(1))
    assert sol.objective_slots == 22
    assert sol.slots == (2, 20)


def test_max_slots_rejects_infeasible_scale():
    p = ScheduleProblem(links=(LinkEntry(30, 10, queue=30),), n_d=22, radio_budget=22)
    with pytest.raises(InconsistentInputError):
        solve_max_slots(p, Fraction(1))


def test_empty_queue_gets_no_slots():
    p = ScheduleProblem(links=(LinkEntry(9, 9, queue=0), LinkEntry(9, 9, queue=4)), n_d=22, radio_budget=22)
    assert solve_max_scale(p).slots == (0, 4)
    assert solve_max_slots(p, Fraction(1)).slots == (0, 9)


def test_parent_reservation_blocks_interfering_child():
    # alpha-2 parent link holding 11 slots fills all 22 expanded slots
    p = ScheduleProblem(
        links=(LinkEntry(5, 22, queue=5),),
        n_d=22,
        radio_budget=22,
        parent=ParentReservation(alpha=2, slots=11, interferes=(True,)),
    )
    assert solve_max_scale(p).slots == (0,)
    assert oracle_enumerate(p).slots == (0,)


def test_oracle_overflow():
    p = ScheduleProblem(links=(LinkEntry(1, 22),) * 6, n_d=22, radio_budget=200)
    with pytest.raises(OracleOverflowError):
        oracle_enumerate(p)


def test_problem_validation():
    with pytest.raises(InconsistentInputError):
        ScheduleProblem(links=(LinkEntry(1, 30),), n_d=22, radio_budget=22)
    with pytest.raises(InconsistentInputError):
        ScheduleProblem(links=(LinkEntry(-1, 3),), n_d=22, radio_budget=22)


def random_problem(rng: np.random.Generator) -> ScheduleProblem:
    n_d = int(rng.integers(2, 13))
    m = int(rng.integers(1, 5))
    rate = int(rng.integers(1, 4))
    links = []
    for _ in range(m):
        alpha = int(rng.choice([1, 1, 2]))
        demand = int(rng.integers(0, 3 * n_d * rate))
        queue = None if rng.random() < 0.3 else int(rng.integers(0, 3 * n_d * rate))
        links.append(LinkEntry(demand, int(rng.integers(1, n_d + 1)), alpha, queue))
    pairs = frozenset((j, k) for j in range(m) for k in range(j + 1, m) if rng.random() < 0.4)
    parent = None
    if rng.random() < 0.3:
        parent = ParentReservation(int(rng.choice([1, 2])), int(rng.integers(0, n_d // 2 + 1)),
                                   tuple(bool(rng.random() < 0.5) for _ in range(m)))
    return ScheduleProblem(tuple(links), n_d, int(rng.integers(m, m * n_d + 1)), rate, pairs, parent=parent)


def test_solver_matches_oracle_on_random_instances():
    rng = np.random.default_rng(20240611)
    checked = 0
    for _ in range(1000):
        p = random_problem(rng)
        try:
            truth = oracle_enumerate(p)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                solve_max_scale(p)
            continue
        sol = solve_max_scale(p)
        assert sol.scale == truth.scale
        assert sol.slots == truth.slots
        best = solve_max_slots(p, sol.scale)
        assert best.slots == truth.best_slots
        checked += 1
    assert checked > 800


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_witness_is_feasible_and_minimal(seed):
    p = random_problem(np.random.default_rng(seed))
    try:
        sol = solve_max_scale(p)
    except InfeasibleError:
        return
    n = list(sol.slots)
    assert feasible(p, n, sol.scale)
    for j, v in enumerate(n):
        if v > 0:
            assert not feasible(p, n[:j] + [v - 1] + n[j + 1:], sol.scale)
    enhanced = solve_max_slots(p, sol.scale)
    assert feasible(p, list(enhanced.slots), sol.scale)
    assert enhanced.objective_slots >= sol.objective_slots


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), bump=st.integers(1, 40))
def test_more_demand_never_raises_scale(seed, bump):
    p = random_problem(np.random.default_rng(seed))
    try:
        before = solve_max_scale(p).scale
    except InfeasibleError:
        return
    links = list(p.links)
    e = links[0]
    links[0] = LinkEntry(e.demand + bump, e.upper, e.alpha, e.queue)
    bigger = ScheduleProblem(tuple(links), p.n_d, p.radio_budget, p.rate, p.interference, p.aggregate, p.parent)
    assert solve_max_scale(bigger).scale <= before
