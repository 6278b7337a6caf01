"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line in the terminal summary."""
import dataclasses
import math
import time

import numpy as np
import pytest
from scipy import stats

from divfuzz.analysis import distinct_failures, mann_whitney_greater, primary_rule
from divfuzz.behavior import fit_clusters, interpolate, trace_distance, window_features
from divfuzz.cli import load_config
from divfuzz.controller import make_controller
from divfuzz.energy import (Corpus, EnergyWeights, Seed, failure_delta, init_child_energy, select_seed,
                            selection_probabilities, update_parent_energy, violation_delta)
from divfuzz.fuzzer import replay, run_campaign
from divfuzz.geometry import box_to_box_distance, box_to_polyline_distance
from divfuzz.oracle import destination_degree
from divfuzz.roadmap import load_map
from divfuzz.scenario import shipped_seeds

import oracles
from conftest import ACCEPTANCE_LINES
from test_behavior import attr, blobs
from test_geometry import random_box, random_line


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def hamming(a, b):
    return oracles.hamming_distance(list(a), list(b))


# -- 1 -----------------------------------------------------------------------------

def test_criterion_1_formula_fidelity(s1_seeds):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    sc = s1_seeds[0]
    dev = {}

    # behavior distance
    worst = 0.0
    for _ in range(200):
        a = rng.integers(0, 10, rng.integers(1, 40))
        b = rng.integers(0, 10, rng.integers(1, 40))
        worst = max(worst, abs(trace_distance(a, b) - hamming(a, b)))
    dev["distance"] = worst
    example = trace_distance([1, 1, 2], [1, 2, 2, 3, 3])

    # destination degree
    worst = 0.0
    for d in rng.uniform(0, 30, 200):
        worst = max(worst, abs(destination_degree(d) - (10.0 - d if d < 10.0 else 0.0)))
    dev["destination"] = worst

    # failure term, violation term, parent update, child energy
    w_df = w_dv = w_upd = w_child = 0.0
    for _ in range(200):
        f, nf = int(rng.integers(0, 30)), int(rng.integers(0, 30))
        failed = bool(rng.integers(2))
        o_p, o_c, dist = rng.uniform(0, 70), rng.uniform(0, 70), rng.uniform(0, 1)
        e0 = rng.uniform(-2, 3)
        w1, w2, w3 = rng.uniform(0, 2, 3)
        F, NF = f + failed, nf + (not failed)
        df = F / (F + NF) if failed else -0.1 * NF / (F + NF)
        dv = (o_p - o_c) / (1.0 - dist + 0.00001)
        w_df = max(w_df, abs(failure_delta(F, NF, failed) - df))
        w_dv = max(w_dv, abs(violation_delta(o_p, o_c, dist) - dv))
        parent = Seed(sc, np.zeros(1, int), o_p, e0, fail_count=f, nonfail_count=nf)
        got = update_parent_energy(parent, failed, o_c, dist, EnergyWeights(w1, w2, w3))
        w_upd = max(w_upd, abs(got - (e0 + w1 * df + w2 * dv + w3 * -0.05)))
        w_child = max(w_child, abs(init_child_energy(o_p, o_c, dist, EnergyWeights(w1, w2, w3)) - (1 + w2 * dv)))
    dev.update(failure_term=w_df, violation_term=w_dv, update=w_upd, child=w_child)

    # selection probabilities
    worst = 0.0
    for _ in range(200):
        e = list(rng.uniform(-3, 3, rng.integers(1, 20)))
        pos = [max(x, 0.0) for x in e]
        total = sum(pos)
        expect = [x / total for x in pos] if total > 0 else [1 / len(e)] * len(e)
        worst = max(worst, max(abs(p - q) for p, q in zip(selection_probabilities(e), expect)))
    dev["selection"] = worst

    p1 = Seed(sc, np.zeros(1, int), 5.0)
    p2 = Seed(sc, np.zeros(1, int), 5.0)
    e_fail = update_parent_energy(p1, True, 5.0, 0.0)
    e_benign = update_parent_energy(p2, False, 5.0, 0.0)
    elapsed = time.perf_counter() - t0
    ok = (max(dev.values()) <= 1e-9 and abs(example - 0.6) <= 1e-12 and abs(e_fail - 1.45) <= 1e-12
          and abs(e_benign - 0.90) <= 1e-12 and elapsed < 5)
    record(1, ok, f"max deviation {max(dev.values()):.1e} over 7 formulas x 200 inputs; "
                  f"examples 0.6/{e_fail:.2f}/{e_benign:.2f}; {elapsed:.2f}s")


# -- 2 -----------------------------------------------------------------------------

def test_criterion_2_geometry_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    box_err = line_err = 0.0
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        box_err = max(box_err, abs(box_to_box_distance(a, b) - oracles.box_box_distance(a.corners(), b.corners())))
    for _ in range(200):
        b, line = random_box(rng), random_line(rng)
        line_err = max(line_err, abs(box_to_polyline_distance(b, line)
                                     - oracles.box_polyline_distance(b.corners(), line.points)))
    elapsed = time.perf_counter() - t0
    record(2, box_err <= 1e-3 and line_err <= 1e-3 and elapsed < 30,
           f"max error box {box_err:.1e} m, polyline {line_err:.1e} m; {elapsed:.1f}s")


# -- 3 -----------------------------------------------------------------------------

def test_criterion_3_behavior_pipeline():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    a = attr(rng.normal(size=(3, 50)))
    identity = np.array_equal(interpolate(a, 0.1).values, a.values) and \
        np.array_equal(interpolate(a, 0.1).timestamps, a.timestamps)
    constant = all(list(window_features(np.full(w, c))) == [c, c, c, 0, 0, 0, 0, 0]
                   for w in (1, 2, 3, 10, 25) for c in (0.0, -3.7, 12.25, 1e6 + 0.1))
    x = rng.normal(size=(400, 24))
    m1, m2 = fit_clusters([x], 10, rng_seed=17), fit_clusters([x], 10, rng_seed=17)
    deterministic = np.array_equal(m1.centroids, m2.centroids)
    pts, truth = blobs(rng, [(0.0, 0.0), (10.0, 0.0)], n=200, scale=1.0)
    pred = fit_clusters([pts], 2, rng_seed=5).predict(pts)
    purity = all(len(set(pred[truth == c])) == 1 for c in (0, 1)) and len(set(pred)) == 2
    elapsed = time.perf_counter() - t0
    record(3, identity and constant and deterministic and purity and elapsed < 30,
           f"identity={identity} constant={constant} deterministic={deterministic} purity={purity}; {elapsed:.2f}s")


# -- 4 -----------------------------------------------------------------------------

def test_criterion_4_distance_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    bad = 0
    for _ in range(1000):
        a = rng.integers(0, 10, rng.integers(1, 50))
        b = rng.integers(0, 10, rng.integers(1, 50))
        tail = rng.integers(0, 10, rng.integers(1, 20))
        ext = np.concatenate([a, tail])
        d = trace_distance(a, b)
        bad += not (d == trace_distance(b, a) and 0.0 <= d <= 1.0 and trace_distance(a, a) == 0.0
                    and math.isclose(trace_distance(a, ext), len(tail) / len(ext), abs_tol=1e-15))
    elapsed = time.perf_counter() - t0
    record(4, bad == 0 and elapsed < 5, f"{bad} violations over 1000 pairs; {elapsed:.2f}s")


# -- 5 -----------------------------------------------------------------------------

def test_criterion_5_sampler(s1_seeds):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)

    def counts(energies, n=10_000):
        c = Corpus([Seed(s1_seeds[0], np.zeros(1, int), 1.0, e) for e in energies])
        return np.bincount([select_seed(c, rng) for _ in range(n)], minlength=len(energies))

    half = counts([1.0, 1.0])[0] / 10_000
    c21 = counts([2.0, 1.0])
    ratio = c21[0] / c21[1]
    p_uniform = stats.chisquare(counts([-1.0, 0.0, -0.5, -7.0])).pvalue
    elapsed = time.perf_counter() - t0
    ok = abs(half - 0.5) <= 0.03 and abs(ratio / 2.0 - 1.0) <= 0.10 and p_uniform > 0.01 and elapsed < 5
    record(5, ok, f"(1,1) -> {half:.4f}; (2,1) ratio {ratio:.3f}; non-positive chi2 p={p_uniform:.3f}; "
                  f"{elapsed:.2f}s")


# -- 6 and 9 -----------------------------------------------------------------------

@pytest.fixture(scope="session")
def discovery(tmp_path_factory):
    runs = {}
    for name in ("s1", "s4"):
        cfg, _ = load_config(name)
        m = load_map(cfg.map)
        out = tmp_path_factory.mktemp(f"accept_{name}")
        t0 = time.perf_counter()
        res = run_campaign(shipped_seeds(m.name, m), make_controller(cfg.controller), m, cfg, out_dir=out)
        runs[name] = (res, m, time.perf_counter() - t0)
    return runs


@pytest.mark.slow
def test_criterion_6_end_to_end_discovery(discovery):
    details, ok = [], True
    total = 0.0
    for name, (res, m, elapsed) in discovery.items():
        total += elapsed
        rules = [primary_rule(f.verdict.violated_names()) for f in res.failures]
        r1, r3 = rules.count("R1"), rules.count("R3")
        mismatched = 0
        for f in res.failures:
            _, v = replay(res.out_dir / "failures" / f"{f.scenario.id}.yaml",
                          make_controller(res.config.controller), m)
            mismatched += not (v.failed and v.violated_specs == f.verdict.violated_specs)
        ok &= r1 >= 1 and r3 >= 1 and mismatched == 0 and len(res.log) == 500
        details.append(f"{name}: {len(res.failures)} failures (R1={r1}, R3={r3}), {mismatched} replay mismatches")
    ok &= total < 600
    record(6, ok, "; ".join(details) + f"; {total:.0f}s")


@pytest.mark.slow
def test_criterion_9_admission_audit(discovery):
    checked = bad = 0
    for res, _, _ in discovery.values():
        theta = res.config.diversity_threshold
        for e in res.log:
            if e["result"] == "FAULT":
                bad += e["admitted"]
                continue
            checked += 1
            expect = e["result"] == "PASS" and (e["min_distance"] > theta or e["O_child"] < e["O_parent"])
            bad += e["admitted"] != expect
    record(9, bad == 0 and checked > 0, f"{checked} logged iterations audited, {bad} mismatches")


# -- 7 -----------------------------------------------------------------------------

@pytest.mark.nightly
def test_criterion_7_diversity_over_random():
    cfg, _ = load_config("s1")
    m = load_map(cfg.map)
    seeds = shipped_seeds(m.name, m)
    t0 = time.perf_counter()
    counts = {"full": [], "random": []}
    for rep in range(10):
        for mode, flags in (("full", {}), ("random", {"behavior_guidance": False, "energy_mechanism": False})):
            run_cfg = dataclasses.replace(cfg, seed=rep, iterations=500, **flags)
            res = run_campaign(seeds, make_controller(cfg.controller), m, run_cfg)
            counts[mode].append(distinct_failures(res.failure_traces(), cfg.diversity_threshold))
    elapsed = time.perf_counter() - t0
    mean_full, mean_random = np.mean(counts["full"]), np.mean(counts["random"])
    p = mann_whitney_greater(counts["full"], counts["random"])
    ok = mean_full >= mean_random and p < 0.1 and elapsed < 7200
    record(7, ok, f"distinct failures full {counts['full']} (mean {mean_full:.1f}) vs random {counts['random']} "
                  f"(mean {mean_random:.1f}); Mann-Whitney p={p:.4f}; {elapsed:.0f}s")


# -- 8 -----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_ablation_plumbing():
    cfg, _ = load_config("s1")
    m = load_map(cfg.map)
    seeds = shipped_seeds(m.name, m)
    t0 = time.perf_counter()
    no_bg = run_campaign(seeds, make_controller(cfg.controller), m, dataclasses.replace(cfg, behavior_guidance=False))
    refits = sum(bool(e.get("refit")) for e in no_bg.log)
    no_energy = run_campaign(seeds, make_controller(cfg.controller), m,
                             dataclasses.replace(cfg, energy_mechanism=False, iterations=1000))
    # the corpus grows, so map each draw to (index + jitter) / size, which is U(0, 1) under uniform selection
    jitter = np.random.default_rng(808).random(len(no_energy.log))
    u = np.array([(e["parent"] + v) / e["corpus_before"] for e, v in zip(no_energy.log, jitter)])
    p = stats.chisquare(np.histogram(u, bins=10, range=(0.0, 1.0))[0]).pvalue
    elapsed = time.perf_counter() - t0
    ok = len(no_bg.log) == 500 and len(no_energy.log) == 1000 and refits == 0 and p > 0.01 and elapsed < 600
    record(8, ok, f"w/o BG: {len(no_bg.log)} iterations, {refits} refits; w/o Energy: {len(no_energy.log)} "
                  f"selections, chi2 uniformity p={p:.3f}; {elapsed:.0f}s")
