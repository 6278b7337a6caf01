"""Full mode against the three ablations on the same seeds and master seed."""
import dataclasses
import sys

from divfuzz import CampaignConfig, ReferenceController, load_map, run_campaign, shipped_seeds
from divfuzz.analysis import comparison_table, summarize

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 200
m = load_map("s1")
seeds = shipped_seeds("s1", m)
base = CampaignConfig(map="s1", iterations=iterations, seed=3)
modes = {
    "full": {},
    "no-guidance": {"behavior_guidance": False},
    "no-energy": {"energy_mechanism": False},
    "random": {"behavior_guidance": False, "energy_mechanism": False},
}

summaries = []
for name, flags in modes.items():
    cfg = dataclasses.replace(base, **flags)
    res = run_campaign(seeds, ReferenceController, m, cfg)
    summaries.append(summarize(res.log, res.failure_traces(), cfg.diversity_threshold,
                               [s.energy for s in res.corpus.seeds], name=name))
    print(f"{name}: {len(res.failures)} failures in {res.wall_time:.0f}s")

# distinct_failures counts failure traces more than the novelty threshold apart.
print(comparison_table(summaries))
