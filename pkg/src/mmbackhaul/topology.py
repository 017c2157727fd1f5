"""Static model of the backhaul tree.

Node 0 is always the macro-cell BS. Every other node ``i`` owns exactly one
logical link, its parent link ``L_i``, so link identifiers are the child node
ids. Interference is a symmetric set of link pairs; only pairs that share an
endpoint BS are ever generated or constrained.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import ConfigError, MalformedTopologyError

MACRO = 0


@dataclass(frozen=True)
class LogicalLink:
    child: int
    parent: int
    alpha: int
    rate_per_slot: int


def compute_heights(parents: dict[int, int | None] | "TreeTopology") -> dict[int, int]:
    """Height of every node: leaves are 1, internal nodes 1 + max child height.

    Accepts either a topology or a raw ``{node: parent}`` map (root maps to
    ``None``); the raw form is checked for cycles and orphans.
    """
    if isinstance(parents, TreeTopology):
        parents = {i: (None if i == MACRO else p) for i, p in enumerate(parents.parents)}

    children: dict[int, list[int]] = {n: [] for n in parents}
    roots = []
    for node, parent in parents.items():
        if parent is None:
            roots.append(node)
        elif parent not in children:
            raise MalformedTopologyError(f"node {node} has unknown parent {parent}")
        else:
            children[parent].append(node)
    if len(roots) != 1:
        raise MalformedTopologyError(f"expected exactly one root, found {len(roots)}")

    # iterative post-order so deep chains do not hit the recursion limit
    heights: dict[int, int] = {}
    order: list[int] = []
    stack = [roots[0]]
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            raise MalformedTopologyError(f"cycle through node {node}")
        seen.add(node)
        order.append(node)
        stack.extend(children[node])
    if len(seen) != len(parents):
        missing = sorted(set(parents) - seen)
        raise MalformedTopologyError(f"nodes not reachable from the root (cycle?): {missing}")
    for node in reversed(order):
        heights[node] = 1 + max((heights[c] for c in children[node]), default=0)
    return heights


@dataclass(frozen=True)
class TreeTopology:
    """Immutable backhaul tree.

    Attributes:
        parents: ``parents[i]`` is the parent of node ``i``; ``parents[0]`` is -1.
        alpha: expansion factor of each node's parent link (1 or 2); 0 for the macro.
        radio_chains: radio-chain count per node.
        interference: unordered pairs of interfering link ids.
        rate_per_slot: bits carried by one data slot of any physical link.
    """

    parents: tuple[int, ...]
    alpha: tuple[int, ...]
    radio_chains: tuple[int, ...]
    interference: frozenset[frozenset[int]] = field(default_factory=frozenset)
    rate_per_slot: int = 1

    def __post_init__(self):
        n = len(self.parents)
        if n < 2:
            raise MalformedTopologyError("a backhaul tree needs the macro and at least one small cell")
        if len(self.alpha) != n or len(self.radio_chains) != n:
            raise MalformedTopologyError("parents, alpha and radio_chains must have equal length")
        if self.parents[MACRO] != -1:
            raise MalformedTopologyError("node 0 must be the root (parent -1)")
        for i in range(1, n):
            if not 0 <= self.parents[i] < n or self.parents[i] == i:
                raise MalformedTopologyError(f"node {i} has invalid parent {self.parents[i]}")
            if self.alpha[i] not in (1, 2):
                raise MalformedTopologyError(f"link {i} alpha must be 1 or 2, got {self.alpha[i]}")
        if any(r < 1 for r in self.radio_chains):
            raise MalformedTopologyError("every node needs at least one radio chain")
        if self.rate_per_slot < 1:
            raise MalformedTopologyError("rate_per_slot must be positive")
        for pair in self.interference:
            if len(pair) != 2:
                raise MalformedTopologyError(f"interference pair {sorted(pair)} is not two distinct links")
            if any(not 1 <= link < n for link in pair):
                raise MalformedTopologyError(f"interference pair {sorted(pair)} names a missing link")
        # raises on cycles / unreachable nodes
        _ = self.heights

    @property
    def num_nodes(self) -> int:
        return len(self.parents)

    @property
    def nodes(self) -> range:
        return range(self.num_nodes)

    @property
    def small_cells(self) -> range:
        return range(1, self.num_nodes)

    @cached_property
    def links(self) -> tuple[LogicalLink, ...]:
        return tuple(
            LogicalLink(i, self.parents[i], self.alpha[i], self.rate_per_slot) for i in self.small_cells
        )

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i in self.small_cells:
            kids[self.parents[i]].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def heights(self) -> tuple[int, ...]:
        h = compute_heights({i: (None if i == MACRO else p) for i, p in enumerate(self.parents)})
        return tuple(h[i] for i in self.nodes)

    @property
    def depth(self) -> int:
        """Height of the macro-cell BS (``H``)."""
        return self.heights[MACRO]

    @cached_property
    def subtrees(self) -> tuple[frozenset[int], ...]:
        """Node set of the subtree rooted at each node (inclusive)."""
        sets: list[set[int]] = [{i} for i in self.nodes]
        for node in sorted(self.nodes, key=lambda i: self.heights[i]):
            if node != MACRO:
                sets[self.parents[node]] |= sets[node]
        return tuple(frozenset(s) for s in sets)

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def interferes(self, a: int, b: int) -> bool:
        return a != b and frozenset((a, b)) in self.interference

    def interference_matrix(self) -> np.ndarray:
        """Dense 0/1 matrix indexed by link id (row/column 0 unused)."""
        mat = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int8)
        for a, b in (tuple(p) for p in self.interference):
            mat[a, b] = mat[b, a] = 1
        return mat

    def path_to_macro(self, node: int) -> list[int]:
        path = [node]
        while path[-1] != MACRO:
            path.append(self.parents[path[-1]])
            if len(path) > self.num_nodes:
                raise MalformedTopologyError("cycle while walking to the macro")
        return path

    def attached_links(self, node: int) -> list[int]:
        """Links with an endpoint at ``node``: its parent link then its child links."""
        own = [] if node == MACRO else [node]
        return own + list(self.children[node])

    def with_radio_chains(self, radio_chains: Iterable[int]) -> "TreeTopology":
        return TreeTopology(self.parents, self.alpha, tuple(radio_chains), self.interference, self.rate_per_slot)

    def with_interference(self, pairs: Iterable[Iterable[int]]) -> "TreeTopology":
        return TreeTopology(
            self.parents, self.alpha, self.radio_chains, frozenset(frozenset(p) for p in pairs), self.rate_per_slot
        )

    # -- serialization -------------------------------------------------

    def to_text(self) -> str:
        lines = ["# backhaul tree: node <id> <parent> <alpha> <radio_chains>; interfere <link> <link>",
                 f"rate_per_slot {self.rate_per_slot}"]
        for i in self.nodes:
            if i == MACRO:
                lines.append(f"node {i} - - {self.radio_chains[i]}")
            else:
                lines.append(f"node {i} {self.parents[i]} {self.alpha[i]} {self.radio_chains[i]}")
        for a, b in sorted(tuple(sorted(p)) for p in self.interference):
            lines.append(f"interfere {a} {b}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TreeTopology":
        rate = 1
        nodes: dict[int, tuple[int, int, int]] = {}
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            kind, *fields = line.split()
            try:
                if kind == "rate_per_slot":
                    (rate,) = map(int, fields)
                elif kind == "node":
                    ident, parent, alpha, radio = fields
                    if int(ident) in nodes:
                        raise MalformedTopologyError(f"line {lineno}: duplicate node {ident}")
                    nodes[int(ident)] = (
                        -1 if parent == "-" else int(parent),
                        0 if alpha == "-" else int(alpha),
                        int(radio),
                    )
                elif kind == "interfere":
                    a, b = map(int, fields)
                    pairs.append((a, b))
                else:
                    raise MalformedTopologyError(f"line {lineno}: unknown record {kind!r}")
            except MalformedTopologyError:
                raise
            except ValueError as exc:
                raise MalformedTopologyError(f"line {lineno}: {exc}") from None
        if sorted(nodes) != list(range(len(nodes))):
            raise MalformedTopologyError("node ids must be 0..N-1")
        ordered = [nodes[i] for i in range(len(nodes))]
        return cls(
            parents=tuple(p for p, _, _ in ordered),
            alpha=tuple(a for _, a, _ in ordered),
            radio_chains=tuple(r for _, _, r in ordered),
            interference=frozenset(frozenset(p) for p in pairs),
            rate_per_slot=rate,
        )

    def to_dict(self) -> dict:
        return {
            "parents": list(self.parents),
            "alpha": list(self.alpha),
            "radio_chains": list(self.radio_chains),
            "interference": sorted(sorted(p) for p in self.interference),
            "rate_per_slot": self.rate_per_slot,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeTopology":
        return cls(
            parents=tuple(data["parents"]),
            alpha=tuple(data["alpha"]),
            radio_chains=tuple(data["radio_chains"]),
            interference=frozenset(frozenset(p) for p in data.get("interference", [])),
            rate_per_slot=int(data.get("rate_per_slot", 1)),
        )


def candidate_interference_pairs(parents: tuple[int, ...]) -> list[tuple[int, int]]:
    """Link pairs sharing an endpoint BS: siblings, and a parent link with a child link."""
    n = len(parents)
    kids: list[list[int]] = [[] for _ in range(n)]
    for i in range(1, n):
        kids[parents[i]].append(i)
    pairs = set()
    for node in range(n):
        attached = ([node] if node != MACRO else []) + kids[node]
        pairs.update(itertools.combinations(sorted(attached), 2))
    return sorted(pairs)


def enough_radio_chains(parents: tuple[int, ...]) -> tuple[int, ...]:
    """One radio chain per attached link, so the per-slot cap never binds."""
    counts = [0 if i == MACRO else 1 for i in range(len(parents))]
    for i in range(1, len(parents)):
        counts[parents[i]] += 1
    return tuple(max(1, c) for c in counts)


LINK_RANGE = 0.4  # in units of the deployment radius


def _sector_tree(num_nodes: int, max_children: int, rng: np.random.Generator) -> list[int]:
    n = num_nodes - 1
    radius = np.sqrt(rng.random(n))
    angle = rng.random(n) * 2 * np.pi
    pos = np.vstack([[0.0, 0.0], np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])])
    rotated = (angle - rng.random() * 2 * np.pi) % (2 * np.pi)
    sectors = np.array_split(1 + np.argsort(rotated, kind="stable"), min(max_children, n))

    parents = [-1] * num_nodes
    kids = [0] * num_nodes
    hops = [0] * num_nodes
    for members in sectors:
        members = sorted(members.tolist(), key=lambda u: (radius[u - 1], u))
        parents[members[0]], hops[members[0]] = MACRO, 1
        kids[MACRO] += 1
        placed = [members[0]]
        for u in members[1:]:
            open_ = [q for q in placed if kids[q] < max_children]
            dist = {q: float(np.hypot(*(pos[q] - pos[u]))) for q in open_}
            near = [q for q in open_ if dist[q] <= LINK_RANGE]
            if near:
                parent = min(near, key=lambda q: (hops[q], dist[q], q))
            else:
                parent = min(open_, key=lambda q: (dist[q], q))
            parents[u], hops[u] = parent, hops[parent] + 1
            kids[parent] += 1
            placed.append(u)
    return parents


def generate_tree(
    num_nodes: int,
    max_children: int = 4,
    interference_pair_fraction: float = 0.0,
    multihop_fraction: float = 0.0,
    seed: int = 0,
    rate_per_slot: int = 1,
) -> TreeTopology:
    """Random backhaul tree rooted at the macro-cell BS.

    Small cells are dropped uniformly in a unit disc around the macro. The
    macro serves ``min(max_children, num_nodes - 1)`` angular sectors holding
    near-equal numbers of BSs; inside a sector each BS, nearest to the macro
    first, attaches to the in-range BS with the fewest hops to the macro
    (ties by distance) that still has room for a child. Tree shape, multi-hop
    link choice and interference pairs come from three independent random
    streams derived from ``seed``, so changing one fraction leaves the other
    parts of the topology unchanged. Radio chains default to one per attached
    link.
    """
    if num_nodes < 2:
        raise ConfigError("num_nodes", "need at least 2 nodes (macro plus one small cell)")
    if max_children < 1:
        raise ConfigError("max_children", "must be positive")
    for name, value in (("interference_pair_fraction", interference_pair_fraction),
                        ("multihop_fraction", multihop_fraction)):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(name, f"must lie in [0, 1], got {value}")

    tree_ss, alpha_ss, intf_ss = np.random.SeedSequence(seed).spawn(3)
    parents = _sector_tree(num_nodes, max_children, np.random.default_rng(tree_ss))

    links = num_nodes - 1
    n_multi = int(round(multihop_fraction * links))
    multi = np.random.default_rng(alpha_ss).choice(np.arange(1, num_nodes), size=n_multi, replace=False)
    alpha = [0] + [1] * links
    for link in multi:
        alpha[int(link)] = 2

    candidates = candidate_interference_pairs(tuple(parents))
    n_pairs = int(round(interference_pair_fraction * len(candidates)))
    picked = np.random.default_rng(intf_ss).choice(len(candidates), size=n_pairs, replace=False)
    pairs = frozenset(frozenset(candidates[int(k)]) for k in picked)

    parents_t = tuple(parents)
    return TreeTopology(parents_t, tuple(alpha), enough_radio_chains(parents_t), pairs, rate_per_slot)
