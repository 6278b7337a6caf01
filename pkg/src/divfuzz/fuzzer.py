"""The fuzzing campaign: select, mutate, simulate, analyze, admit, update energy, refit clusters."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .behavior import ClusterModel, MinerConfig, abstract, fit_clusters, min_corpus_distance, trace_distance, trace_features
from .energy import (Corpus, EnergyWeights, FailureRecord, Seed, init_child_energy, init_energy, load_corpus,
                     save_corpus, select_seed, update_parent_energy)
from .mutation import ROUTE, WAYPOINT, MutationConfig, mutate_route, mutate_waypoints, mutation_kind
from .oracle import VerdictReport, evaluate
from .roadmap import MapModel, load_map
from .scenario import Scenario, load_scenario, save_scenario
from .simulator import ControllerFault, ObservationTrace, SimConfig, save_trace, simulate

log = logging.getLogger(__name__)

# independent RNG streams per iteration
STREAM_SELECT, STREAM_MUTATE, STREAM_KIND, STREAM_CLUSTER = range(4)
INITIAL_FIT = 2**32 - 1


@dataclass(frozen=True)
class CampaignConfig:
    clusters: int = 10
    diversity_threshold: float = 0.4
    energy_threshold: float = 0.5
    epsilon: float = 0.5
    w_failure: float = 0.5
    w_violation: float = 0.5
    w_decay: float = 1.0
    window: int = 10
    step: float = 0.1
    channels: tuple[str, ...] = ("speed", "heading", "acceleration")
    iterations: int = 100
    time_budget: float | None = None   # wall-clock seconds; stops early when exceeded
    seed: int = 0
    behavior_guidance: bool = True
    energy_mechanism: bool = True
    speed_std: float = 1.0
    lateral_std: float = 0.5
    waypoint_count: int = 5
    v_max_npc: float = 15.0
    max_retries: int = 10
    spawn_clearance: float = 2.0
    distance_cap: bool = True
    save_traces: str = "failures"      # "failures", "all" or "none"
    checkpoint_every: int = 0          # 0: checkpoint only at the end
    map: str | None = None
    seeds: tuple[str, ...] = ()
    controller: str = "reference"

    def __post_init__(self):
        if not 0.0 < self.diversity_threshold < 1.0:
            raise ValueError("diversity_threshold must lie in (0, 1)")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time_budget must be positive")
        if self.clusters < 2:
            raise ValueError("clusters must be >= 2")
        if self.save_traces not in ("failures", "all", "none"):
            raise ValueError("save_traces must be one of failures, all, none")
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def mutation(self) -> MutationConfig:
        return MutationConfig(self.energy_threshold, self.epsilon, self.speed_std, self.lateral_std,
                              self.waypoint_count, self.v_max_npc, self.max_retries, self.spawn_clearance)

    @property
    def weights(self) -> EnergyWeights:
        return EnergyWeights(self.w_failure, self.w_violation, self.w_decay)

    @property
    def miner(self) -> MinerConfig:
        return MinerConfig(self.channels, self.step, self.window, self.clusters)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["channels"] = list(self.channels)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**d)


@dataclass(eq=False)
class CampaignResult:
    corpus: Corpus
    log: list[dict]
    model: ClusterModel
    config: CampaignConfig
    wall_time: float
    sim_time: float
    out_dir: Path | None = None

    @property
    def failures(self) -> list[FailureRecord]:
        return self.corpus.failed

    def failure_traces(self) -> list[np.ndarray]:
        """Failure abstract traces under the final cluster model."""
        return [abstract(f.merged_states, self.model) if f.merged_states is not None else f.abstract_trace
                for f in self.corpus.failed]


def _rng(seed: int, iteration: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, iteration, stream]))


def _make_controller(controller):
    """Accept a controller class, a zero-argument factory, or a ready instance."""
    if isinstance(controller, type) or not hasattr(controller, "step"):
        return controller()
    return controller


def _run(s: Scenario, m: MapModel, controller, cap: bool, sim_cfg: SimConfig | None = None):
    trace = simulate(s, m, _make_controller(controller), config=sim_cfg)
    return trace, evaluate(trace, s, m, cap)


class _Output:
    """Campaign output directory: corpus/, failures/, traces/, campaign_log.jsonl, model.json."""

    def __init__(self, root, save_traces: str, append: bool = False):
        self.root = Path(root) if root is not None else None
        self.save_traces = save_traces
        self._log = None
        if self.root is None:
            return
        for sub in ("corpus", "failures", "traces"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._log = open(self.root / "campaign_log.jsonl", "a" if append else "w")

    def config(self, cfg: CampaignConfig):
        if self.root is not None:
            (self.root / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))

    def record(self, entry: dict):
        if self._log is not None:
            self._log.write(json.dumps(entry) + "\n")
            self._log.flush()

    def failure(self, s: Scenario, trace: ObservationTrace, verdict: VerdictReport):
        if self.root is None:
            return
        save_scenario(s, self.root / "failures" / f"{s.id}.yaml")
        if self.save_traces != "none":
            save_trace(trace, self.root / "traces" / f"{s.id}.json", verdict)

    def trace(self, s: Scenario, trace: ObservationTrace, verdict: VerdictReport):
        if self.root is not None and self.save_traces == "all":
            save_trace(trace, self.root / "traces" / f"{s.id}.json", verdict)

    def checkpoint(self, corpus: Corpus, model: ClusterModel, next_iteration: int):
        if self.root is None:
            return
        save_corpus(corpus, self.root / "checkpoint")
        (self.root / "checkpoint" / "progress.json").write_text(json.dumps({"next_iteration": next_iteration}))
        (self.root / "model.json").write_text(json.dumps(model.to_dict()))

    def final(self, corpus: Corpus, model: ClusterModel, failure_traces, next_iteration: int):
        if self.root is None:
            return
        self.checkpoint(corpus, model, next_iteration)
        for s in corpus.seeds:
            save_scenario(s.scenario, self.root / "corpus" / f"{s.scenario.id}.yaml")
        dump = {
            "corpus": {s.scenario.id: s.abstract_trace.tolist() for s in corpus.seeds},
            "failures": {f.scenario.id: t.tolist() for f, t in zip(corpus.failed, failure_traces)},
        }
        (self.root / "abstract_traces.json").write_text(json.dumps(dump))

    def close(self):
        if self._log is not None:
            self._log.close()


def _refit(corpus: Corpus, cfg: CampaignConfig, rng) -> ClusterModel:
    model = fit_clusters([s.merged_states for s in corpus.seeds], cfg.clusters, rng)
    for s in corpus.seeds:
        s.abstract_trace = abstract(s.merged_states, model)
    return model


def _load_failures(root: Path, log_entries: list[dict]) -> list[FailureRecord]:
    out = []
    for e in log_entries:
        if e["result"] != "FAILURE":
            continue
        s = load_scenario(root / "failures" / f"{e['child']}.yaml")
        out.append(FailureRecord(s, VerdictReport.from_dict(e["verdict"]), np.array(e.get("abstract", []), dtype=np.int64),
                                 e["iteration"], None))
    return out


def run_campaign(initial_seeds: list[Scenario], controller: Callable, m: MapModel,
                 cfg: CampaignConfig = CampaignConfig(), out_dir=None, resume: bool = False,
                 sim_config: SimConfig | None = None, progress: Callable[[dict], None] | None = None) -> CampaignResult:
    """Run one fuzzing campaign.

    ``controller`` is a factory (for example a class) called once per simulation
    so that stateful controllers start fresh. With ``out_dir`` the campaign
    streams its log and stores failures there; ``resume`` continues from the
    checkpoint a previous run left in the same directory.
    """
    if not initial_seeds and not resume:
        raise ValueError("a campaign needs at least one initial seed")
    out_path = Path(out_dir) if out_dir is not None else None
    start_iter = 0
    entries: list[dict] = []
    if resume:
        if out_path is None or not (out_path / "checkpoint" / "corpus.json").exists():
            raise FileNotFoundError("resume requested but no checkpoint found")
        with open(out_path / "campaign_log.jsonl") as fh:
            entries = [json.loads(line) for line in fh if line.strip()]
        corpus = load_corpus(out_path / "checkpoint")
        model = ClusterModel.from_dict(json.loads((out_path / "model.json").read_text()))
        start_iter = json.loads((out_path / "checkpoint" / "progress.json").read_text())["next_iteration"]
        # drop log lines written after the checkpoint; those iterations are redone
        entries = [e for e in entries if e["iteration"] < start_iter]
        with open(out_path / "campaign_log.jsonl", "w") as fh:
            fh.writelines(json.dumps(e) + "\n" for e in entries)
        corpus.failed = _load_failures(out_path, entries)
    out = _Output(out_path, cfg.save_traces, append=resume)
    out.config(cfg)
    t_start = time.perf_counter()
    sim_time = 0.0
    mcfg = cfg.mutation

    if not resume:
        corpus = Corpus()
        for s in initial_seeds:
            t0 = time.perf_counter()
            trace, verdict = _run(s, m, controller, cfg.distance_cap, sim_config)
            sim_time += time.perf_counter() - t0
            merged = trace_features(trace, cfg.miner)
            corpus.seeds.append(Seed(s, np.zeros(len(merged), dtype=np.int64), verdict.violation_degree,
                                     merged_states=merged.states))
        init_energy(corpus)
        model = _refit(corpus, cfg, _rng(cfg.seed, INITIAL_FIT, STREAM_CLUSTER))

    try:
        it = start_iter
        while it < cfg.iterations:
            if cfg.time_budget is not None and time.perf_counter() - t_start >= cfg.time_budget:
                break
            entry = _iteration(it, corpus, model, controller, m, cfg, mcfg, out, sim_config)
            if entry.pop("_refit", None) is not None:
                model = _refit(corpus, cfg, _rng(cfg.seed, it, STREAM_CLUSTER))
                entry["corpus_size"] = len(corpus.seeds)
            sim_time += entry["sim_time"]
            entries.append(entry)
            out.record(entry)
            if progress is not None:
                progress(entry)
            if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                out.checkpoint(corpus, model, it + 1)
            it += 1
        result = CampaignResult(corpus, entries, model, cfg, time.perf_counter() - t_start, sim_time, out_path)
        out.final(corpus, model, result.failure_traces(), it)
    finally:
        out.close()
    return result


def _iteration(it: int, corpus: Corpus, model: ClusterModel, controller, m: MapModel, cfg: CampaignConfig,
               mcfg: MutationConfig, out: _Output, sim_config) -> dict:
    rng_sel = _rng(cfg.seed, it, STREAM_SELECT)
    corpus_before = len(corpus.seeds)
    idx = select_seed(corpus, rng_sel, uniform=not cfg.energy_mechanism)
    parent = corpus.seeds[idx]
    energy_before = parent.energy
    if cfg.energy_mechanism:
        kind = mutation_kind(parent.energy, mcfg)
    else:
        kind = ROUTE if _rng(cfg.seed, it, STREAM_KIND).random() < 0.5 else WAYPOINT
    mutate = mutate_waypoints if kind == WAYPOINT else mutate_route
    child = mutate(parent.scenario, mcfg, m, _rng(cfg.seed, it, STREAM_MUTATE), new_id=f"it{it:05d}")

    entry = {
        "iteration": it, "parent": idx, "corpus_before": corpus_before, "parent_id": parent.scenario.id,
        "child": child.id,
        "kind": kind, "O_parent": parent.violation_degree, "energy_before": energy_before,
    }
    t0 = time.perf_counter()
    try:
        trace, verdict = _run(child, m, controller, cfg.distance_cap, sim_config)
    except ControllerFault as exc:
        log.warning("controller fault on %s: %s", child.id, exc)
        update_parent_energy(parent, False, parent.violation_degree, 0.0, cfg.weights)
        entry.update(fault=str(exc), result="FAULT", admitted=False, novel=False, refit=False,
                     sim_time=time.perf_counter() - t0, energy_after=parent.energy,
                     corpus_size=len(corpus.seeds), behaviors=len(corpus.behaviors))
        return entry
    sim_time = time.perf_counter() - t0

    merged = trace_features(trace, cfg.miner)
    child_trace = abstract(merged, model)
    o_child = verdict.violation_degree
    d_min = min_corpus_distance(child_trace, corpus.behaviors)
    d_parent = trace_distance(child_trace, parent.abstract_trace) if cfg.behavior_guidance else 0.0
    novel = cfg.behavior_guidance and d_min > cfg.diversity_threshold
    admitted = refit = False
    child_energy = None
    if verdict.failed:
        corpus.failed.append(FailureRecord(child, verdict, child_trace, it, merged.states))
        out.failure(child, trace, verdict)
    else:
        out.trace(child, trace, verdict)
        if novel or o_child < parent.violation_degree:
            child_energy = init_child_energy(parent.violation_degree, o_child, d_parent, cfg.weights)
            corpus.seeds.append(Seed(child, child_trace, o_child, child_energy, merged_states=merged.states,
                                     in_behaviors=True))
            admitted = True
        refit = novel
    update_parent_energy(parent, verdict.failed, o_child, d_parent, cfg.weights)
    entry.update(
        result=verdict.result.value, violated=verdict.violated_names(), verdict=verdict.to_dict(),
        O_child=o_child, min_distance=d_min, parent_distance=d_parent, admitted=admitted, novel=novel,
        refit=refit, child_energy=child_energy, energy_after=parent.energy, termination=trace.termination.value,
        corpus_size=len(corpus.seeds), behaviors=len(corpus.behaviors), abstract=child_trace.tolist(),
        sim_time=sim_time,
    )
    if refit:
        entry["_refit"] = True
    return entry


def replay(scenario_path, controller, m: MapModel | None = None, cap: bool = True,
           sim_config: SimConfig | None = None) -> tuple[ObservationTrace, VerdictReport]:
    """Re-simulate a stored scenario and evaluate it."""
    s = load_scenario(scenario_path, m)
    if m is None:
        m = load_map(s.map_ref)
    return _run(s, m, controller, cap, sim_config)
