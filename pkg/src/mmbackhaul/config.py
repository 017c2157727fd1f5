"""Scenario configuration.

A scenario is one JSON document. Every field has a documented default; the
defaults reproduce the evaluation setup of the distributed scheduler
(24 slots per 0.1 ms subframe, 13.3 Gbps links, 1:2 uplink:downlink demand,
1000 subframes).
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .engine import SubframeClock
from .errors import ConfigError, MalformedTopologyError
from .topology import MACRO, TreeTopology, enough_radio_chains, generate_tree
from .traffic import ArrivalModel, DemandProfile, bits_per_subframe

PRESETS = ("MI-ER", "LI-LR(2)")
DEFAULT_LILR_INTERFERENCE = 0.1


@dataclass
class ScenarioConfig:
    # topology: exactly one of {"generator": {...}}, {"file": path}, {"inline": {...}}
    topology: dict = field(default_factory=lambda: {"generator": {"num_nodes": 20, "max_children": 4,
                                                                   "multihop_fraction": 0.1, "seed": 0}})
    preset: str | None = "MI-ER"
    radio_chains: list[int] | None = None
    slots_per_subframe: int = 24
    data_slots: int = 22
    subframe_duration: float = 1e-4
    link_rate_bps: float = 13.3e9
    n_sub: int = 8
    load_bps: float = 1.0e9
    ul_share: float = 1 / 3
    demand_steps: list[dict] = field(default_factory=list)
    arrivals: str = "deterministic"
    # packet limit of every per-flow queue at every BS (backpressure, drops at the source); null = unbounded
    flow_buffer_packets: int | None = 64
    filter_window: int = 4
    filter_threshold: float = 0.5
    enhancement: bool = True
    num_subframes: int = 1000
    warmup_subframes: int = 100
    seed: int = 0
    output: str = "out"
    schedule_log: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        cfg = cls(**copy.deepcopy(data))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError("preset", f"must be one of {PRESETS} or null")
        if not isinstance(self.topology, dict) or len(set(self.topology) & {"generator", "file", "inline"}) != 1:
            raise ConfigError("topology", "give exactly one of generator, file, inline")
        if self.slots_per_subframe - 2 != self.data_slots:
            raise ConfigError("data_slots", "must equal slots_per_subframe - 2")
        if self.link_rate_bps <= 0:
            raise ConfigError("link_rate_bps", "must be positive")
        if self.subframe_duration <= 0:
            raise ConfigError("subframe_duration", "must be positive")
        if self.load_bps < 0:
            raise ConfigError("load_bps", "must be non-negative")
        if not 0 <= self.ul_share <= 1:
            raise ConfigError("ul_share", "must lie in [0, 1]")
        if self.arrivals not in ("deterministic", "poisson"):
            raise ConfigError("arrivals", "must be 'deterministic' or 'poisson'")
        if self.flow_buffer_packets is not None and self.flow_buffer_packets < 1:
            raise ConfigError("flow_buffer_packets", "must be positive or null")
        if self.filter_window < 1:
            raise ConfigError("filter_window", "must be at least 1")
        if self.filter_threshold < 0:
            raise ConfigError("filter_threshold", "must be non-negative")
        if self.num_subframes < 1:
            raise ConfigError("num_subframes", "must be positive")
        if self.n_sub < 1:
            raise ConfigError("n_sub", "must be positive")
        for i, step in enumerate(self.demand_steps):
            if not {"node", "subframe"} <= set(step):
                raise ConfigError(f"demand_steps[{i}]", "needs node and subframe")

    # -- derived objects -------------------------------------------------

    @property
    def clock(self) -> SubframeClock:
        return SubframeClock(self.slots_per_subframe, self.data_slots, self.subframe_duration)

    @property
    def rate_per_slot(self) -> int:
        return int(round(self.link_rate_bps * self.clock.slot_duration))

    def build_topology(self) -> TreeTopology:
        source = self.topology
        rate = self.rate_per_slot
        try:
            if "generator" in source:
                gen = dict(source["generator"])
                if self.preset == "MI-ER":
                    gen["interference_pair_fraction"] = 0.0
                elif self.preset == "LI-LR(2)":
                    gen.setdefault("interference_pair_fraction", DEFAULT_LILR_INTERFERENCE)
                gen.setdefault("seed", self.seed)
                topo = generate_tree(rate_per_slot=rate, **gen)
            elif "file" in source:
                topo = TreeTopology.from_text(Path(source["file"]).read_text())
            else:
                topo = TreeTopology.from_dict(source["inline"])
        except (TypeError, KeyError) as exc:
            raise ConfigError("topology", str(exc)) from None
        except MalformedTopologyError as exc:
            raise ConfigError("topology", str(exc)) from None
        except OSError as exc:
            raise ConfigError("topology.file", str(exc)) from None
        topo = TreeTopology(topo.parents, topo.alpha, topo.radio_chains, topo.interference, rate)
        topo = apply_preset(topo, self.preset)
        if self.radio_chains is not None:
            if len(self.radio_chains) != topo.num_nodes:
                raise ConfigError("radio_chains", f"need {topo.num_nodes} entries")
            try:
                topo = topo.with_radio_chains(self.radio_chains)
            except MalformedTopologyError as exc:
                raise ConfigError("radio_chains", str(exc)) from None
        if self.num_subframes < topo.depth:
            raise ConfigError("num_subframes", f"must be at least the tree depth {topo.depth}")
        if max(len(c) for c in topo.children) > self.n_sub:
            raise ConfigError("n_sub", "fewer sub-slots than children at some BS")
        return topo

    def build_profile(self, topology: TreeTopology) -> DemandProfile:
        total = bits_per_subframe(self.load_bps, self.subframe_duration)
        ul = int(round(total * self.ul_share))
        profile = DemandProfile.uniform(topology.small_cells, total - ul, ul)
        by_node: dict[int, list] = {}
        for step in self.demand_steps:
            node = int(step["node"])
            if not 1 <= node < topology.num_nodes:
                raise ConfigError("demand_steps", f"node {node} is not a small cell")
            dl = step.get("dl_bps")
            ul_ = step.get("ul_bps")
            by_node.setdefault(node, []).append((
                int(step["subframe"]),
                None if dl is None else bits_per_subframe(dl, self.subframe_duration),
                None if ul_ is None else bits_per_subframe(ul_, self.subframe_duration),
            ))
        for node, steps in by_node.items():
            profile = profile.with_steps(node, steps)
        return profile

    def build_arrivals(self, topology: TreeTopology) -> ArrivalModel:
        return ArrivalModel(topology.rate_per_slot, self.arrivals, self.seed)

    def manifest(self, topology: TreeTopology) -> dict:
        """Config with the topology and preset expanded to explicit values."""
        data = self.to_dict()
        data["topology"] = {"inline": topology.to_dict()}
        data["radio_chains"] = list(topology.radio_chains)
        data["preset"] = None
        return data


def apply_preset(topology: TreeTopology, preset: str | None) -> TreeTopology:
    if preset is None:
        return topology
    if preset == "MI-ER":
        topo = topology.with_interference([])
        return topo.with_radio_chains(enough_radio_chains(topo.parents))
    if preset == "LI-LR(2)":
        return topology.with_radio_chains([2 if i == MACRO else 1 for i in topology.nodes])
    raise ConfigError("preset", f"unknown preset {preset!r}")


__all__ = ["ScenarioConfig", "apply_preset", "PRESETS"]
