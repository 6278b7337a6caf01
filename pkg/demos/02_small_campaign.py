"""A short fuzzing campaign on the intersection map, then replay of what it found."""
import sys
import tempfile
from pathlib import Path

from divfuzz import CampaignConfig, ReferenceController, load_map, replay, run_campaign, shipped_seeds
from divfuzz.analysis import comparison_table, summarize_dir

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 150
m = load_map("s1")
cfg = CampaignConfig(map="s1", iterations=iterations, seed=0)
out = Path(tempfile.mkdtemp(prefix="divfuzz_demo_"))

def progress(entry):
    if entry["result"] == "FAILURE":
        print(f"  iteration {entry['iteration']:4d}: {entry['child']} violates {', '.join(entry['violated'])}")

result = run_campaign(shipped_seeds("s1", m), ReferenceController, m, cfg, out_dir=out, progress=progress)
print(f"\n{len(result.log)} iterations in {result.wall_time:.1f}s, corpus grew to {len(result.corpus)} seeds")
print(comparison_table([summarize_dir(out)]))

# Every stored failure is a plain scenario file and replays deterministically.
for f in result.failures[:3]:
    _, verdict = replay(out / "failures" / f"{f.scenario.id}.yaml", ReferenceController, m)
    print(f"replay {f.scenario.id}: {verdict.result.value} {verdict.violated_names()}")
print(f"outputs in {out}")
