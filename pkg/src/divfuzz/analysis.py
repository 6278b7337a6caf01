"""Post-hoc campaign statistics: failure classification, distinct failures, summaries and sweeps."""
from __future__ import annotations

import dataclasses
import json
from collections import Counter
from pathlib import Path

import numpy as np
from scipy import stats

from .behavior import trace_distance

RULE_LABELS = {"Collision": "R1", "IllegalLine": "R2", "Destination": "R3"}


def primary_rule(violated) -> str | None:
    """Label a failure by its first violated rule in R1, R2, R3 order.

    A collision ends the run early, so the ego is usually also short of its
    destination; counting each failure once under its leading rule keeps the
    per-rule totals from double counting.
    """
    for name, label in RULE_LABELS.items():
        if name in violated:
            return label
    return None


def distinct_failures(traces, threshold: float | None = None) -> int:
    """Number of distinct abstract traces.

    Without ``threshold`` traces are compared exactly. With it, traces are
    scanned in order and one is counted when its behavior distance to every
    previously counted trace exceeds ``threshold``.
    """
    if threshold is None:
        return len({tuple(np.asarray(t).tolist()) for t in traces})
    reps: list[np.ndarray] = []
    for t in traces:
        if all(trace_distance(t, r) > threshold for r in reps):
            reps.append(np.asarray(t))
    return len(reps)


def pearson(x, y) -> tuple[float, float]:
    """Pearson r and its two-sided p-value (t distribution with n - 2 degrees of freedom)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 pairs")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ValueError("correlation undefined for a constant column")
    res = stats.pearsonr(x, y)
    return float(res.statistic), float(res.pvalue)


def read_log(path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "campaign_log.jsonl"
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                e = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed log line ({exc.msg})") from None
            if "iteration" not in e or "result" not in e:
                raise ValueError(f"{path}:{lineno}: log record lacks iteration/result")
            entries.append(e)
    return entries


def correlation_diversity_fitness(campaign_log, min_points: int = 10) -> tuple[float, float]:
    """Correlation between a child's novelty (min behavior distance) and its violation degree."""
    entries = read_log(campaign_log) if isinstance(campaign_log, (str, Path)) else campaign_log
    pairs = [(e["min_distance"], e["O_child"]) for e in entries
             if e.get("min_distance") is not None and e.get("O_child") is not None]
    if len(pairs) < min_points:
        raise ValueError(f"need at least {min_points} iterations with distance and violation degree, got {len(pairs)}")
    d, o = np.array(pairs).T
    return pearson(d, o)


def mann_whitney_greater(a, b) -> float:
    """One-sided p-value for the hypothesis that samples ``a`` tend to exceed samples ``b``."""
    return float(stats.mannwhitneyu(a, b, alternative="greater").pvalue)


# -- campaign summaries --------------------------------------------------------

def summarize(entries: list[dict], failure_traces=None, threshold: float = 0.4,
              energies=None, name: str = "") -> dict:
    """Counts and statistics of one campaign, all recomputable from its log."""
    failures = [e for e in entries if e["result"] == "FAILURE"]
    rules = Counter(primary_rule(e["violated"]) for e in failures)
    by_spec = Counter(v for e in failures for v in e["violated"])
    if failure_traces is None:
        failure_traces = [e["abstract"] for e in failures if "abstract" in e]
    growth = [[e["iteration"], e["corpus_size"]] for e in entries if e.get("admitted")]
    out = {
        "campaign": name,
        "iterations": len(entries),
        "failures": len(failures),
        "R1": rules.get("R1", 0),
        "R2": rules.get("R2", 0),
        "R3": rules.get("R3", 0),
        "violations_by_spec": {k: by_spec.get(k, 0) for k in RULE_LABELS},
        "distinct_failures": distinct_failures(failure_traces, threshold),
        "distinct_failures_exact": distinct_failures(failure_traces),
        "admitted": sum(1 for e in entries if e.get("admitted")),
        "refits": sum(1 for e in entries if e.get("refit")),
        "faults": sum(1 for e in entries if e["result"] == "FAULT"),
        "mutation_kinds": dict(sorted(Counter(e.get("kind") for e in entries).items())),
        "corpus_growth": growth,
        "final_corpus_size": entries[-1]["corpus_size"] if entries else None,
    }
    if energies is not None and len(energies):
        e = np.asarray(energies, dtype=float)
        out["energy"] = {"mean": float(e.mean()), "min": float(e.min()), "max": float(e.max()),
                         "positive_fraction": float(np.mean(e > 0))}
    out["timing"] = {"sim_time_total": float(sum(e.get("sim_time", 0.0) for e in entries))}
    return out


def summarize_dir(directory) -> dict:
    """Summary of a campaign output directory (log, config, abstract-trace dump, checkpoint)."""
    directory = Path(directory)
    entries = read_log(directory)
    threshold = 0.4
    if (directory / "config.json").exists():
        threshold = json.loads((directory / "config.json").read_text()).get("diversity_threshold", threshold)
    traces = None
    dump_path = directory / "abstract_traces.json"
    if dump_path.exists():
        dump = json.loads(dump_path.read_text())["failures"]
        ids = [e["child"] for e in entries if e["result"] == "FAILURE"]
        if all(i in dump for i in ids):
            traces = [dump[i] for i in ids]
    energies = None
    ck = directory / "checkpoint" / "corpus.json"
    if ck.exists():
        energies = [s["energy"] for s in json.loads(ck.read_text())["seeds"]]
    return summarize(entries, traces, threshold, energies, name=directory.name)


TABLE_ROWS = ("iterations", "failures", "R1", "R2", "R3", "distinct_failures", "distinct_failures_exact",
              "admitted", "refits", "faults", "final_corpus_size")


def comparison_table(summaries: list[dict]) -> str:
    """Plain-text table with one column per campaign."""
    names = [s["campaign"] or f"#{i}" for i, s in enumerate(summaries)]
    rows = [("metric", *names)]
    for key in TABLE_ROWS:
        rows.append((key, *(str(s.get(key, "")) for s in summaries)))
    if all("energy" in s for s in summaries):
        rows.append(("energy_mean", *(f"{s['energy']['mean']:.3f}" for s in summaries)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def window_sweep(base_config, window_sizes, initial_seeds, controller, m, out_root=None) -> list[dict]:
    """One campaign per window size, sharing the master seed, tabulating violations per size."""
    from .fuzzer import run_campaign

    sizes = list(window_sizes)
    if len(set(sizes)) != len(sizes):
        raise ValueError(f"duplicate window sizes in {sizes}")
    if not sizes or any(w < 1 for w in sizes):
        raise ValueError("window sizes must be positive integers")
    rows = []
    for w in sizes:
        cfg = dataclasses.replace(base_config, window=w)
        out = Path(out_root) / f"w{w}" if out_root is not None else None
        result = run_campaign(initial_seeds, controller, m, cfg, out_dir=out)
        s = summarize(result.log, result.failure_traces(), cfg.diversity_threshold, name=f"w={w}")
        rows.append({"window": w, **{k: s[k] for k in ("failures", "R1", "R2", "R3", "distinct_failures")}})
    return rows
