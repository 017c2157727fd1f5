import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmbackhaul import MACRO, ConfigError, MalformedTopologyError, TreeTopology, compute_heights, generate_tree
from mmbackhaul.topology import candidate_interference_pairs, enough_radio_chains


def chain(n):
    parents = (-1,) + tuple(range(n - 1))
    return TreeTopology(parents, (0,) + (1,) * (n - 1), enough_radio_chains(parents))


def check_invariants(topo: TreeTopology):
    for i in topo.small_cells:
        path = topo.path_to_macro(i)
        assert path[-1] == MACRO and len(set(path)) == len(path)
    mat = topo.interference_matrix()
    assert (mat == mat.T).all()
    assert not np.diag(mat).any()
    h = topo.heights
    for node in topo.nodes:
        kids = topo.children[node]
        if kids:
            assert all(h[node] >= h[k] + 1 for k in kids)
            assert any(h[node] == h[k] + 1 for k in kids)
        else:
            assert h[node] == 1
    assert topo.depth == h[MACRO]


def test_heights_chain():
    assert compute_heights({0: None, 1: 0, 2: 1}) == {2: 1, 1: 2, 0: 3}


def test_heights_star():
    assert compute_heights({0: None, 1: 0, 2: 0, 3: 0}) == {0: 2, 1: 1, 2: 1, 3: 1}


def test_heights_balanced_binary():
    h = compute_heights({0: None, 1: 0, 2: 0, 3: 1, 4: 1, 5: 2, 6: 2})
    assert h[0] == 3
    assert [h[i] for i in (3, 4, 5, 6)] == [1, 1, 1, 1]


def test_heights_cycle_raises():
    with pytest.raises(MalformedTopologyError):
        compute_heights({0: None, 1: 2, 2: 1})


def test_heights_accepts_topology():
    topo = chain(4)
    assert compute_heights(topo) == {0: 4, 1: 3, 2: 2, 3: 1}


def test_constructor_rejects_bad_alpha():
    with pytest.raises(MalformedTopologyError):
        TreeTopology((-1, 0), (0, 3), (1, 1))


def test_constructor_rejects_cycle():
    with pytest.raises(MalformedTopologyError):
        TreeTopology((-1, 2, 1), (0, 1, 1), (1, 1, 1))


def test_generate_smallest_tree():
    topo = generate_tree(2, 4, 0.0, 0.0, 7)
    assert topo.parents == (-1, 0)
    assert topo.alpha[1] == 1
    assert not topo.interference


def test_generate_twenty_nodes_invariants():
    topo = generate_tree(20, 4, 0.0, 0.0, 1)
    assert topo.num_nodes == 20
    assert all(len(k) <= 4 for k in topo.children)
    check_invariants(topo)


def test_generate_is_deterministic():
    a = generate_tree(15, 3, 0.2, 0.3, 11)
    b = generate_tree(15, 3, 0.2, 0.3, 11)
    assert a == b


def test_generate_fractions():
    topo = generate_tree(21, 4, 0.25, 0.1, 3)
    assert sum(a == 2 for a in topo.alpha) == 2
    candidates = candidate_interference_pairs(topo.parents)
    assert len(topo.interference) == round(0.25 * len(candidates))
    for pair in topo.interference:
        assert tuple(sorted(pair)) in candidates


def test_generate_rejects_tiny():
    with pytest.raises(ConfigError):
        generate_tree(1)


def test_text_round_trip():
    topo = generate_tree(12, 3, 0.3, 0.25, 5, rate_per_slot=55417)
    assert TreeTopology.from_text(topo.to_text()) == topo


def test_dict_round_trip():
    topo = generate_tree(9, 2, 0.2, 0.2, 8)
    assert TreeTopology.from_dict(topo.to_dict()) == topo


def test_from_text_rejects_duplicate_node():
    text = "node 0 - - 1\nnode 1 0 1 1\nnode 1 0 1 1\n"
    with pytest.raises(MalformedTopologyError, match="duplicate"):
        TreeTopology.from_text(text)


def test_subtrees_and_attached_links():
    topo = TreeTopology((-1, 0, 1, 1, 0), (0, 1, 1, 2, 1), (2, 3, 1, 1, 1))
    assert topo.subtrees[1] == {1, 2, 3}
    assert topo.subtrees[MACRO] == set(range(5))
    assert topo.attached_links(1) == [1, 2, 3]
    assert topo.attached_links(MACRO) == [1, 4]


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 30), kids=st.integers(1, 5), intf=st.floats(0, 1), multi=st.floats(0, 1),
       seed=st.integers(0, 10**6))
def test_generated_trees_are_valid(n, kids, intf, multi, seed):
    topo = generate_tree(n, kids, intf, multi, seed)
    check_invariants(topo)
    assert all(len(k) <= kids for k in topo.children)
    assert TreeTopology.from_text(topo.to_text()) == topo
