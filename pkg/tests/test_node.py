from fractions import Fraction

import pytest

from mmbackhaul import (
    InconsistentInputError,
    LinkAllocation,
    ReportingFilter,
    TreeTopology,
    compute_final_schedule,
    compute_local_schedule,
    fill_packets,
    place_slots,
    split_directions,
)
from mmbackhaul.checker import check_schedule
from mmbackhaul.node import ChildReport, DemandReport, FinalSchedule, QueueState, compute_final_schedule_nonleaf


def star(n_children, interfering=(), radio=None, rate=1):
    parents = (-1,) + (0,) * n_children
    chains = (radio or n_children,) + (1,) * n_children
    return TreeTopology(parents, (0,) + (1,) * n_children, chains, frozenset(frozenset(p) for p in interfering), rate)


# reporting filter

def test_filter_constant_stream():
    f = ReportingFilter(window=4, threshold=0.5)
    assert [f.update(10) for _ in range(8)] == [10] * 8


def test_filter_jump():
    f = ReportingFilter(window=4, threshold=0.5)
    out = [f.update(v) for v in (10, 10, 10, 20, 20, 20, 20)]
    assert out == [10, 10, 10, 10, 10, 18, 18]


def test_filter_zero_threshold_tracks_mean():
    f = ReportingFilter(window=4, threshold=0.0)
    out = [f.update(v) for v in (4, 4, 4, 8, 8)]
    assert out == [4, 4, 4, 5, 6]


def test_filter_prime_does_not_record():
    f = ReportingFilter(window=2, threshold=0.5)
    assert f.prime(7) == 7
    assert len(f.history) == 0
    assert f.update(3) == 3


# local schedule

def test_local_leaf_zero_demand():
    topo = star(1)
    scale, n_hat = compute_local_schedule(1, DemandReport(), {}, topo, 22)
    assert scale == 1 and n_hat == 0


def test_local_leaf_exact_fit():
    topo = star(1, rate=100)
    scale, n_hat = compute_local_schedule(1, DemandReport(1400, 800), {}, topo, 22)
    assert scale == 1 and n_hat == 22


def test_local_nonleaf_example():
    topo = TreeTopology((-1, 0, 1), (0, 1, 1), (1, 2, 1))
    scale, n_hat = compute_local_schedule(1, DemandReport(1, 0), {2: DemandReport(6, 4)}, topo, 22)
    assert scale == 1 and n_hat == 11


def test_local_rejects_macro():
    with pytest.raises(InconsistentInputError):
        compute_local_schedule(0, DemandReport(), {}, star(1), 22)


# split and fill

def test_split_ratio():
    q = 1000
    assert split_directions(9, 2 * q, q) == (6, 3)


def test_split_one_sided():
    assert split_directions(5, 7, 0) == (5, 0)


def test_split_nothing_allocated():
    assert split_directions(0, 7, 7) == (0, 0)


def test_split_both_positive_floor():
    assert split_directions(2, 1000, 1) == (1, 1)


def test_split_empty_queues_raise():
    with pytest.raises(InconsistentInputError):
        split_directions(3, 0, 0)


def test_fill_under_quota():
    assert fill_packets(6, {1: 4, 2: 2}) == {1: 4, 2: 2}


def test_fill_largest_remainder_tie():
    assert fill_packets(5, {1: 10, 2: 10}) == {1: 3, 2: 2}


def test_fill_zero_quota():
    assert fill_packets(0, {1: 4}) == {}


def test_fill_proportional():
    take = fill_packets(6, {3: 9, 5: 3})
    assert take == {3: 5, 5: 1} or take == {3: 4, 5: 2}
    assert sum(take.values()) == 6


# placement

def test_place_single_link():
    placed, repairs = place_slots({1: 5}, star(1), 0, 22)
    assert placed == {1: (0, 5)} and repairs == 0


def test_place_interfering_pair():
    topo = star(2, interfering=[(1, 2)], radio=2)
    placed, repairs = place_slots({1: 11, 2: 11}, topo, 0, 22)
    a = LinkAllocation(1, 1, 11, 11, 0, placed[1][0], 11)
    b = LinkAllocation(2, 1, 11, 11, 0, placed[2][0], 11)
    assert list(a.window) == list(range(0, 11))
    assert list(b.window) == list(range(11, 22))
    assert repairs == 0


def test_alpha_two_alternate_slots():
    alloc = LinkAllocation(link=1, alpha=2, n_total=3, n_down=2, n_up=1, start=0, cap=3)
    assert list(alloc.window) == list(range(6))
    assert alloc.parent_end_slots() == [0, 2, 4]
    assert alloc.child_end_slots() == [1, 3, 5]


def test_place_respects_radio_chains():
    topo = star(3, radio=1)
    placed, repairs = place_slots({1: 8, 2: 8, 3: 6}, topo, 0, 22)
    assert repairs == 0
    spans = sorted((s, s + n) for s, n in placed.values())
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


def test_place_repairs_overfull_request():
    topo = star(2, interfering=[(1, 2)], radio=2)
    placed, repairs = place_slots({1: 12, 2: 12}, topo, 0, 22)
    assert repairs == 2
    assert placed[1][1] + placed[2][1] == 22


# final schedules

def report(n_hat, ul_queue=0, dl=0, ul=0):
    return ChildReport(ul_queue=ul_queue, demand=DemandReport(dl, ul), n_hat=n_hat)


def test_macro_empty_queues():
    topo = star(2)
    sched = compute_final_schedule(0, topo, {1: report(4), 2: report(4)}, QueueState(), 22, target=5)
    assert sched.allocations == {}


def test_macro_symmetric_children():
    topo = star(2, rate=10)
    queues = QueueState(dl={1: 6, 2: 6})
    reps = {1: report(8, ul_queue=3, dl=60, ul=30), 2: report(8, ul_queue=3, dl=60, ul=30)}
    sched = compute_final_schedule(0, topo, reps, queues, 22, target=5)
    assert sched.allocations[1].n_total == sched.allocations[2].n_total
    assert not check_schedule(sched, topo, 22)


def test_macro_enhancement_uses_slack():
    topo = star(2, rate=10)
    queues = QueueState(dl={1: 2, 2: 1})
    reps = {1: report(9, ul_queue=1, dl=30, ul=10), 2: report(7, ul_queue=1, dl=20, ul=10)}
    base = compute_final_schedule(0, topo, reps, queues, 22, target=5, enhancement=False)
    more = compute_final_schedule(0, topo, reps, queues, 22, target=5, enhancement=True)
    assert more.total_slots > base.total_slots
    for k, a in more.allocations.items():
        q = (queues.dl[k] + reps[k].ul_queue) * topo.rate_per_slot
        assert a.n_total * topo.rate_per_slot >= more.scale * min(q, reps[k].demand.total)
        assert a.n_total <= reps[k].n_hat


def test_missing_report_gets_nothing():
    topo = star(2)
    sched = compute_final_schedule(0, topo, {1: report(5, ul_queue=2)}, QueueState(dl={2: 4}), 22, target=3)
    assert set(sched.allocations) == {1}


def test_nonleaf_interfering_child_blocked_by_alpha_two_parent():
    topo = TreeTopology((-1, 0, 1), (0, 2, 1), (1, 2, 1), frozenset({frozenset((1, 2))}))
    parent_alloc = LinkAllocation(link=1, alpha=2, n_total=11, n_down=6, n_up=5, start=0, cap=11)
    parent_final = FinalSchedule(node=0, subframe_index=4, allocations={1: parent_alloc})
    sched = compute_final_schedule_nonleaf(1, topo, parent_final, {2: report(5, ul_queue=3, dl=4, ul=2)},
                                           QueueState(dl={2: 4}), 22, target=4)
    assert sched.allocations == {}
    assert sched.parent_link == parent_alloc


def test_nonleaf_without_parent_schedule_idles():
    topo = TreeTopology((-1, 0, 1), (0, 1, 1), (1, 2, 1))
    assert compute_final_schedule_nonleaf(1, topo, None, {}, QueueState(), 22, target=3) is None


def test_nonleaf_zero_reservation_matches_macro_formulation():
    topo = TreeTopology((-1, 0, 1, 1), (0, 1, 1, 1), (1, 3, 1, 1))
    reps = {2: report(6, ul_queue=2, dl=4, ul=2), 3: report(4, ul_queue=1, dl=3, ul=1)}
    queues = QueueState(dl={2: 3, 3: 2})
    empty = LinkAllocation(link=1, alpha=1, n_total=0, n_down=0, n_up=0, start=0, cap=0)
    sched = compute_final_schedule(1, topo, reps, queues, 22, 4, parent_alloc=empty)
    assert {k: a.n_total for k, a in sched.allocations.items()} == {2: 5, 3: 3}
    assert sched.scale == Fraction(1)
