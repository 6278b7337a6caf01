"""Regenerate the shipped map assets under src/divfuzz/data/maps/.

    python tools/build_maps.py

S1/S2 share a four-way non-signalized intersection, S3/S4 share a straight
road with two lanes in each direction. Right-hand traffic, 3.5 m lanes.
"""
import math
from pathlib import Path

import numpy as np

from divfuzz.geometry import Polyline, Pose2D
from divfuzz.roadmap import Lane, MapModel, Neighbor, Route, save_map

OUT = Path(__file__).resolve().parents[1] / "src" / "divfuzz" / "data" / "maps"

LANE_W = 3.5
HALF = LANE_W / 2
BOX = 7.0      # intersection half-size
ARM = 120.0    # arm length measured from the center

DIRS = {"E": 0.0, "N": math.pi / 2, "W": math.pi, "S": -math.pi / 2}
LEFT_OF = {"E": "N", "N": "W", "W": "S", "S": "E"}
RIGHT_OF = {v: k for k, v in LEFT_OF.items()}


def rot(pts, theta):
    c, s = math.cos(theta), math.sin(theta)
    pts = np.asarray(pts, dtype=float)
    out = np.column_stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1]])
    return np.round(out, 6)


def arc(cx, cy, r, a0, a1, spacing=1.0):
    n = max(3, int(math.ceil(abs(a1 - a0) * r / spacing)) + 1)
    a = np.linspace(a0, a1, n)
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])


def intersection(name: str) -> MapModel:
    lanes = {}
    for d, th in DIRS.items():
        # geometry authored for eastbound travel, then rotated
        approach = rot([(-ARM, -HALF), (-BOX, -HALF)], th)
        exit_ = rot([(BOX, -HALF), (ARM, -HALF)], th)
        straight = rot([(-BOX, -HALF), (BOX, -HALF)], th)
        left = rot(arc(-BOX, BOX, BOX + HALF, -math.pi / 2, 0.0), th)
        right = rot(arc(-BOX, -BOX, BOX - HALF, math.pi / 2, 0.0), th)
        lanes[f"in_{d}"] = Lane(f"in_{d}", Polyline(approach), LANE_W,
                                (f"{d}_straight", f"{d}_left", f"{d}_right"))
        lanes[f"out_{d}"] = Lane(f"out_{d}", Polyline(exit_), LANE_W, ())
        lanes[f"{d}_straight"] = Lane(f"{d}_straight", Polyline(straight), LANE_W, (f"out_{d}",))
        lanes[f"{d}_left"] = Lane(f"{d}_left", Polyline(left), LANE_W, (f"out_{LEFT_OF[d]}",))
        lanes[f"{d}_right"] = Lane(f"{d}_right", Polyline(right), LANE_W, (f"out_{RIGHT_OF[d]}",))

    lines = []
    for th in DIRS.values():
        lines.append(Polyline(rot([(-ARM, 0.0), (-BOX, 0.0)], th)))          # double yellow
        lines.append(Polyline(rot([(-ARM, -LANE_W), (-BOX, -LANE_W)], th)))  # curbs
        lines.append(Polyline(rot([(-ARM, LANE_W), (-BOX, LANE_W)], th)))

    routes = []
    for d, th in DIRS.items():
        for back in (25.0, 45.0, 70.0):
            start_xy = rot([(-BOX - back, -HALF)], th)[0]
            start = Pose2D(float(start_xy[0]), float(start_xy[1]), th)
            for turn, target in (("straight", d), ("left", LEFT_OF[d]), ("right", RIGHT_OF[d])):
                goal = rot([(BOX + 60.0, -HALF)], DIRS[target])[0]
                routes.append(Route(start, (float(goal[0]), float(goal[1])),
                                    (f"in_{d}", f"{d}_{turn}", f"out_{target}"),
                                    name=f"{d}-{turn}-{int(back)}"))
    return MapModel(name, lanes, lines, routes)


ROAD_LEN = 400.0


def four_lane_road(name: str) -> MapModel:
    def lane(lid, y, eastbound, left=None, right=None):
        pts = [(0.0, y), (ROAD_LEN, y)] if eastbound else [(ROAD_LEN, y), (0.0, y)]
        return Lane(lid, Polyline(pts), LANE_W, (), left, right)

    lanes = {
        "E1": lane("E1", -HALF, True, Neighbor("W1", False), Neighbor("E2", True)),
        "E2": lane("E2", -3 * HALF, True, Neighbor("E1", True), None),
        "W1": lane("W1", HALF, False, Neighbor("E1", False), Neighbor("W2", True)),
        "W2": lane("W2", 3 * HALF, False, Neighbor("W1", True), None),
    }
    lines = [
        Polyline([(0.0, 0.0), (ROAD_LEN, 0.0)]),
        Polyline([(0.0, -2 * LANE_W), (ROAD_LEN, -2 * LANE_W)]),
        Polyline([(0.0, 2 * LANE_W), (ROAD_LEN, 2 * LANE_W)]),
    ]
    ys = {"E1": -HALF, "E2": -3 * HALF, "W1": HALF, "W2": 3 * HALF}
    routes = []
    for x0 in (20.0, 45.0, 75.0, 100.0, 130.0):
        for a, b in (("E1", "E1"), ("E2", "E2"), ("E1", "E2"), ("E2", "E1")):
            seq = (a,) if a == b else (a, b)
            routes.append(Route(Pose2D(x0, ys[a], 0.0), (360.0, ys[b]), seq, name=f"{a}-{b}-{int(x0)}"))
    for x0 in (380.0, 330.0):
        for a in ("W1", "W2"):
            routes.append(Route(Pose2D(x0, ys[a], math.pi), (20.0, ys[a]), (a,), name=f"{a}-{int(x0)}"))
    return MapModel(name, lanes, lines, routes)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, builder in (("s1", intersection), ("s2", intersection), ("s3", four_lane_road), ("s4", four_lane_road)):
        save_map(builder(name), OUT / f"{name}.yaml")
        print("wrote", OUT / f"{name}.yaml")


if __name__ == "__main__":
    main()
