"""Seed corpus with per-seed energy: initialization, updates and energy-proportional selection."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scenario import Scenario, scenario_from_dict, scenario_to_dict

GAMMA = 1e-5
SELECTION_DECAY = -0.05
BENIGN_PENALTY = 0.1


@dataclass(frozen=True)
class EnergyWeights:
    failure: float = 0.5
    violation: float = 0.5
    decay: float = 1.0


@dataclass(eq=False)
class Seed:
    scenario: Scenario
    abstract_trace: np.ndarray
    violation_degree: float
    energy: float = 1.0
    fail_count: int = 0
    nonfail_count: int = 0
    selection_count: int = 0
    merged_states: np.ndarray | None = field(default=None, repr=False)
    in_behaviors: bool = False   # admitted during the campaign, so its behavior belongs to the novelty set

    def __post_init__(self):
        if self.violation_degree < 0:
            raise ValueError("violation degree must be non-negative")


@dataclass(eq=False)
class FailureRecord:
    scenario: Scenario
    verdict: object            # VerdictReport
    abstract_trace: np.ndarray
    iteration: int
    merged_states: np.ndarray | None = field(default=None, repr=False)


@dataclass(eq=False)
class Corpus:
    seeds: list[Seed] = field(default_factory=list)
    failed: list[FailureRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.seeds)

    @property
    def behaviors(self) -> list[np.ndarray]:
        """Abstract traces of every seed admitted during the campaign (initial seeds excluded)."""
        return [s.abstract_trace for s in self.seeds if s.in_behaviors]

    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.seeds], dtype=float)


def init_energy(corpus: Corpus) -> None:
    for seed in corpus.seeds:
        seed.energy = 1.0
        seed.fail_count = seed.nonfail_count = seed.selection_count = 0


def failure_delta(fail_count: int, nonfail_count: int, failed: bool) -> float:
    total = fail_count + nonfail_count
    if total <= 0:
        raise ValueError("counters must include the current child")
    if failed:
        return fail_count / total
    return -BENIGN_PENALTY * (nonfail_count / total)


def violation_delta(o_parent: float, o_child: float, dist: float, gamma: float = GAMMA) -> float:
    """Progress in violation degree, amplified when the child behaves unlike its parent."""
    return (o_parent - o_child) / (1.0 - dist + gamma)


def update_parent_energy(parent: Seed, child_failed: bool, o_child: float, dist: float,
                         weights: EnergyWeights = EnergyWeights(), gamma: float = GAMMA) -> float:
    """Count the child against its parent, then apply the weighted energy update."""
    if hasattr(child_failed, "failed"):
        child_failed = child_failed.failed
    if child_failed:
        parent.fail_count += 1
    else:
        parent.nonfail_count += 1
    d_f = failure_delta(parent.fail_count, parent.nonfail_count, bool(child_failed))
    d_v = violation_delta(parent.violation_degree, o_child, dist, gamma)
    parent.energy = parent.energy + weights.failure * d_f + weights.violation * d_v + weights.decay * SELECTION_DECAY
    return parent.energy


def init_child_energy(o_parent: float, o_child: float, dist: float,
                      weights: EnergyWeights = EnergyWeights(), gamma: float = GAMMA) -> float:
    return 1.0 + weights.violation * violation_delta(o_parent, o_child, dist, gamma)


def selection_probabilities(energies) -> np.ndarray:
    """Probabilities proportional to the positive part of each energy; uniform if none is positive."""
    e = np.maximum(np.asarray(energies, dtype=float), 0.0)
    if len(e) == 0:
        raise ValueError("cannot select from an empty corpus")
    total = e.sum()
    if not total > 0 or not np.isfinite(total):
        return np.full(len(e), 1.0 / len(e))
    return e / total


def select_seed(corpus: Corpus, rng: np.random.Generator, uniform: bool = False) -> int:
    """Draw a seed index (energy-weighted unless ``uniform``) and bump its selection count."""
    if not corpus.seeds:
        raise ValueError("cannot select from an empty corpus")
    if uniform:
        idx = int(rng.integers(len(corpus.seeds)))
    else:
        idx = int(rng.choice(len(corpus.seeds), p=selection_probabilities(corpus.energies())))
    corpus.seeds[idx].selection_count += 1
    return idx


# -- checkpoint --------------------------------------------------------------

def save_corpus(corpus: Corpus, directory) -> None:
    """Write seeds, energies, counters and behavior membership to ``corpus.json`` plus merged states to ``states.npz``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "seeds": [{
            "scenario": scenario_to_dict(s.scenario),
            "abstract_trace": s.abstract_trace.tolist(),
            "violation_degree": s.violation_degree,
            "energy": s.energy,
            "fail_count": s.fail_count,
            "nonfail_count": s.nonfail_count,
            "selection_count": s.selection_count,
            "in_behaviors": s.in_behaviors,
        } for s in corpus.seeds],
    }
    (directory / "corpus.json").write_text(json.dumps(doc))
    states = {f"s{i}": s.merged_states for i, s in enumerate(corpus.seeds) if s.merged_states is not None}
    np.savez_compressed(directory / "states.npz", **states)


def load_corpus(directory) -> Corpus:
    directory = Path(directory)
    doc = json.loads((directory / "corpus.json").read_text())
    states = {}
    if (directory / "states.npz").exists():
        with np.load(directory / "states.npz") as z:
            states = {k: z[k] for k in z.files}
    seeds = [Seed(scenario_from_dict(d["scenario"]), np.array(d["abstract_trace"], dtype=np.int64),
                  d["violation_degree"], d["energy"], d["fail_count"], d["nonfail_count"],
                  d["selection_count"], states.get(f"s{i}"), d["in_behaviors"])
             for i, d in enumerate(doc["seeds"])]
    return Corpus(seeds)
