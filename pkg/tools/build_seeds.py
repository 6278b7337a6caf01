"""Author the shipped initial seed scenarios and check that each one passes.

Usage: python3 tools/build_seeds.py  (writes src/divfuzz/data/seeds/<map>/*.yaml)
"""
from pathlib import Path

import numpy as np

from divfuzz.controller import ReferenceController
from divfuzz.geometry import Pose2D
from divfuzz.oracle import evaluate
from divfuzz.roadmap import load_map
from divfuzz.scenario import NpcConfig, Scenario, Waypoint, save_scenario, validate
from divfuzz.simulator import simulate

OUT = Path(__file__).resolve().parents[1] / "src" / "divfuzz" / "data" / "seeds"

EGO = {
    "s1": (Pose2D(-50.0, -1.75, 0.0), (50.0, -1.75)),            # straight through the intersection
    "s2": (Pose2D(-50.0, -1.75, 0.0), (1.75, 50.0)),             # unprotected left turn
    "s3": (Pose2D(60.0, -1.75, 0.0), (260.0, -1.75)),            # lane following with overtaking
    "s4": (Pose2D(60.0, -5.25, 0.0), (260.0, -1.75)),            # mandatory lane change
}

SEEDS = {
    "s1": [
        [("N-straight-70", [6] * 5), ("W-straight-45", [8] * 5)],
        [("S-right-70", [5] * 5), ("E-straight-70", [9] * 5)],
        [("N-left-70", [4] * 5), ("W-right-45", [6] * 5)],
    ],
    "s2": [
        [("N-straight-70", [6] * 5), ("S-right-45", [5] * 5)],
        [("W-straight-70", [7] * 5), ("N-right-45", [5] * 5)],
        [("N-right-70", [5] * 5), ("S-straight-70", [4] * 5)],
    ],
    "s3": [
        [("E2-E2-20", [10] * 5), ("W1-380", [10] * 5)],
        [("E1-E1-130", [8] * 5), ("W2-330", [12] * 5)],
        [("E2-E1-75", [9] * 5), ("W1-330", [9] * 5)],
    ],
    "s4": [
        [("E1-E1-20", [8] * 5), ("W1-330", [10] * 5)],
        [("E2-E2-130", [9] * 5), ("W2-380", [11] * 5)],
        [("E1-E1-130", [10] * 5), ("W1-380", [8] * 5)],
    ],
}


def npc_on_route(m, name, speeds):
    route = next(r for r in m.spawn_routes if r.name == name)
    path = m.route_path(route)
    s = np.linspace(0.0, path.length, len(speeds))
    return NpcConfig(route, tuple(Waypoint(tuple(p), v) for p, v in zip(path.points_at(s), speeds)))


def main():
    for map_name, groups in SEEDS.items():
        m = load_map(map_name)
        start, dest = EGO[map_name]
        (OUT / map_name).mkdir(parents=True, exist_ok=True)
        for k, group in enumerate(groups):
            s = Scenario(f"{map_name}-seed{k}", map_name, start, dest,
                         tuple(npc_on_route(m, n, v) for n, v in group), 60.0)
            problems = validate(s, m)
            if problems:
                raise SystemExit(f"{s.id}: {problems}")
            verdict = evaluate(simulate(s, m, ReferenceController()), s, m)
            print(f"{s.id}: {verdict.result.value} O={verdict.violation_degree:.2f} "
                  f"collision={verdict.f_collision:.2f} lines={verdict.f_lines:.3f}")
            save_scenario(s, OUT / map_name / f"seed{k}.yaml")


if __name__ == "__main__":
    main()
