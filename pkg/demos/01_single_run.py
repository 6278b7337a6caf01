"""One simulation, its verdict, and the behavior abstraction of the ego trace."""
import numpy as np

from divfuzz import ReferenceController, evaluate, load_map, shipped_seeds, simulate
from divfuzz.behavior import MinerConfig, abstract, fit_clusters, trace_distance, trace_features

m = load_map("s1")
seeds = shipped_seeds("s1", m)
s = seeds[0]
print(f"scenario {s.id}: ego {s.ego_start} -> {s.ego_destination}, {len(s.npcs)} NPCs")

# Simulate with the reference controller and judge the run.
trace = simulate(s, m, ReferenceController())
verdict = evaluate(trace, s, m)
print(f"{len(trace.frames)} frames, terminated by {trace.termination.value}")
print(f"verdict {verdict.result.value}: f_collision={verdict.f_collision:.2f} "
      f"f_lines={verdict.f_lines:.2f} f_destination={verdict.f_destination:.2f} O={verdict.violation_degree:.2f}")

# Merged states: eight window statistics per channel (speed, heading, acceleration).
cfg = MinerConfig()
states = [trace_features(simulate(x, m, ReferenceController()), cfg) for x in seeds]
print("merged state matrix of the first run:", states[0].states.shape)

# Cluster all merged states and read each run as a sequence of cluster IDs.
model = fit_clusters(states, cfg.k, rng_seed=0)
traces = [abstract(st, model) for st in states]
for x, ids in zip(seeds, traces):
    runs = np.flatnonzero(np.diff(ids)) + 1
    print(f"{x.id}: {len(ids)} abstract states in {len(runs) + 1} segments")

# The shipped seeds leave the ego undisturbed, so their behaviors coincide.
# Finding NPC motion that pulls these distances apart is the fuzzer's job.
for i in range(len(traces)):
    for j in range(i + 1, len(traces)):
        print(f"distance {seeds[i].id} / {seeds[j].id}: {trace_distance(traces[i], traces[j]):.3f}")
