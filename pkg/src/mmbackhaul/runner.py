"""Scenario execution, artifact emission and parameter sweeps."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .config import ScenarioConfig
from .engine import Engine, PipelineViolation
from .metrics import jain_index, mean_throughput, metrics_csv

log = logging.getLogger(__name__)


def build_engine(config: ScenarioConfig) -> Engine:
    topo = config.build_topology()
    return Engine(
        topo,
        config.build_profile(topo),
        clock=config.clock,
        arrivals=config.build_arrivals(topo),
        window=config.filter_window,
        threshold=config.filter_threshold,
        enhancement=config.enhancement,
        n_sub=config.n_sub,
        keep_schedules=config.schedule_log,
        flow_buffer=config.flow_buffer_packets,
    )


def simulate(config: ScenarioConfig) -> Engine:
    engine = build_engine(config)
    engine.run(config.num_subframes)
    return engine


@dataclass
class RunSummary:
    mean_bps: float
    per_bs_bps: list[float]
    jain: float | None
    aggregate_bps: float
    placement_repairs: int


def summarize(engine: Engine, warmup: int, subframe_duration: float) -> RunSummary:
    start = min(warmup, max(0, engine.subframe - 1)) + 1
    per_bs = [mean_throughput(engine.records, i, start) / subframe_duration for i in engine.topology.small_cells]
    try:
        jain = jain_index(per_bs)
    except ValueError:
        jain = None
    return RunSummary(
        mean_bps=sum(per_bs) / len(per_bs),
        per_bs_bps=per_bs,
        jain=jain,
        aggregate_bps=sum(per_bs),
        placement_repairs=sum(r.placement_repairs for r in engine.records),
    )


def write_artifacts(engine: Engine, config: ScenarioConfig, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out_dir / "metrics.csv",
        "queues": out_dir / "queues.csv",
        "manifest": out_dir / "manifest.json",
        "topology": out_dir / "topology.txt",
    }
    paths["metrics"].write_text(metrics_csv(engine.records))
    with open(paths["queues"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node", "direction", "key", "packets"))
        for st in engine.stations:
            for k in sorted(st.queues.dl):
                w.writerow((st.ident, "dl", k, st.queues.dl[k]))
            for k in sorted(st.queues.ul):
                w.writerow((st.ident, "ul", k, st.queues.ul[k]))
    manifest = config.manifest(engine.topology)
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["topology"].write_text(engine.topology.to_text())
    if config.schedule_log:
        paths["schedules"] = out_dir / "schedules.jsonl"
        with open(paths["schedules"], "w") as fh:
            for sched in engine.schedule_log:
                fh.write(json.dumps(sched.to_dict(), sort_keys=True) + "\n")
    return paths


def run_scenario(config: ScenarioConfig, out_dir: str | Path | None = None) -> tuple[Engine, dict[str, Path]]:
    """Run one scenario and write metrics, queue snapshot, manifest and topology."""
    out = Path(out_dir if out_dir is not None else config.output)
    engine = simulate(config)
    problems = engine.check_pipeline()
    if problems:
        raise PipelineViolation("; ".join(problems[:5]))
    paths = write_artifacts(engine, config, out)
    log.info("ran %d subframes on %d nodes -> %s", engine.subframe, engine.topology.num_nodes, out)
    return engine, paths


SWEEP_COLUMNS = ("preset", "load_bps", "seeds", "mean_bps", "min_seed_bps", "max_seed_bps", "mean_jain",
                 "placement_repairs")


def _sweep_point(args) -> tuple[str | None, float, int, RunSummary]:
    config, preset, load, seed = args
    gen = config.topology.get("generator")
    topology = {"generator": {**gen, "seed": seed}} if gen is not None else config.topology
    cfg = replace(config, preset=preset, load_bps=load, seed=seed, topology=topology, schedule_log=False)
    engine = simulate(cfg)
    return preset, load, seed, summarize(engine, cfg.warmup_subframes, cfg.subframe_duration)


def run_sweep(config: ScenarioConfig, loads: list[float], seeds: list[int], presets: list[str | None],
              out_path: str | Path, jobs: int = 1) -> list[dict]:
    """Mean per-BS throughput for every (preset, load), averaged over seeds."""
    tasks = [(config, p, load, s) for p in presets for load in loads for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    rows = []
    for p in presets:
        for load in loads:
            group = [r for (pp, ll, _, r) in results if pp == p and ll == load]
            jains = [r.jain for r in group if r.jain is not None]
            rows.append({
                "preset": p or "custom",
                "load_bps": load,
                "seeds": len(group),
                "mean_bps": sum(r.mean_bps for r in group) / len(group),
                "min_seed_bps": min(r.mean_bps for r in group),
                "max_seed_bps": max(r.mean_bps for r in group),
                "mean_jain": sum(jains) / len(jains) if jains else "",
                "placement_repairs": sum(r.placement_repairs for r in group),
            })
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


__all__ = ["build_engine", "simulate", "run_scenario", "run_sweep", "summarize", "RunSummary"]
