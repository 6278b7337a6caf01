"""Verdicts and violation degrees for the collision, illegal-line and destination rules."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import batch_box_corners, batch_box_distance, batch_box_polyline_distance, point_to_point_distance
from .roadmap import MapModel
from .scenario import Scenario
from .simulator import ObservationTrace

DESTINATION_THRESHOLD = 1.0
DESTINATION_RANGE = 10.0
DISTANCE_CAP = 50.0


class Spec(str, enum.Enum):
    COLLISION = "Collision"
    ILLEGAL_LINE = "IllegalLine"
    DESTINATION = "Destination"


SPEC_ORDER = (Spec.COLLISION, Spec.ILLEGAL_LINE, Spec.DESTINATION)


class Result(str, enum.Enum):
    PASS = "PASS"
    FAILURE = "FAILURE"


@dataclass(frozen=True)
class VerdictReport:
    result: Result
    violated_specs: frozenset
    f_collision: float
    f_lines: float
    f_destination: float
    raw_collision: float
    raw_lines: float
    destination_distance: float
    capped: bool = True

    @property
    def violation_degree(self) -> float:
        return self.f_collision + self.f_lines + self.f_destination

    @property
    def failed(self) -> bool:
        return self.result is Result.FAILURE

    def violated_names(self) -> list[str]:
        return [s.value for s in SPEC_ORDER if s in self.violated_specs]

    def to_dict(self) -> dict:
        return {
            "result": self.result.value,
            "violated": self.violated_names(),
            "f_collision": self.f_collision,
            "f_lines": self.f_lines,
            "f_destination": self.f_destination,
            "O": self.violation_degree,
            "raw_collision": self.raw_collision,
            "raw_lines": self.raw_lines,
            "destination_distance": self.destination_distance,
            "capped": self.capped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerdictReport":
        return cls(Result(d["result"]), frozenset(Spec(v) for v in d["violated"]), d["f_collision"],
                   d["f_lines"], d["f_destination"], d["raw_collision"], d["raw_lines"],
                   d["destination_distance"], d.get("capped", True))


def min_npc_distance(trace: ObservationTrace) -> float:
    """Minimum ego/NPC box distance over all frames and NPCs (inf without NPCs)."""
    if not trace.npc_sizes:
        return math.inf
    ego = trace.ego_array()
    ce = batch_box_corners(ego[:, :2], ego[:, 2], *trace.ego_size)
    best = math.inf
    for k, (length, width) in enumerate(trace.npc_sizes):
        npc = trace.npc_array(k)
        # center distance minus circumradii is a lower bound; skip hopeless frames
        centre = np.hypot(*(ego[:, :2] - npc[:, :2]).T)
        bound = centre - 0.5 * (math.hypot(*trace.ego_size) + math.hypot(length, width))
        # box distance never exceeds centre distance, so frames whose bound is above it can be skipped
        cand = np.flatnonzero(bound <= min(best, centre.min()))
        if len(cand) == 0:
            continue
        cn = batch_box_corners(npc[cand, :2], npc[cand, 2], length, width)
        best = min(best, float(batch_box_distance(ce[cand], cn).min()))
    return best


def min_line_distance(trace: ObservationTrace, m: MapModel) -> float:
    """Minimum ego box distance to any illegal line over all frames (inf without lines)."""
    if not m.illegal_lines:
        return math.inf
    ego = trace.ego_array()
    ce = batch_box_corners(ego[:, :2], ego[:, 2], *trace.ego_size)
    segs = np.concatenate([line.segments for line in m.illegal_lines])
    return float(batch_box_polyline_distance(ce, segs).min())


def destination_degree(distance: float) -> float:
    return max(DESTINATION_RANGE - distance, 0.0)


def evaluate(trace: ObservationTrace, s: Scenario, m: MapModel, cap: bool = True) -> VerdictReport:
    """Score a finished trace against the three rules.

    Lower violation degree means closer to a violation. With ``cap`` the two
    metre-valued components are limited to ``DISTANCE_CAP`` before summing.
    """
    d_b = min_npc_distance(trace)
    d_l = min_line_distance(trace, m)
    last = trace.frames[-1].ego.pose
    d_dest = point_to_point_distance((last.x, last.y), s.ego_destination)

    violated = set()
    if d_b == 0.0:
        violated.add(Spec.COLLISION)
    if d_l == 0.0:
        violated.add(Spec.ILLEGAL_LINE)
    if d_dest > DESTINATION_THRESHOLD:
        violated.add(Spec.DESTINATION)
    f_c = min(d_b, DISTANCE_CAP) if cap else d_b
    f_l = min(d_l, DISTANCE_CAP) if cap else d_l
    return VerdictReport(
        Result.FAILURE if violated else Result.PASS,
        frozenset(violated),
        f_c, f_l, destination_degree(d_dest),
        d_b, d_l, d_dest, cap,
    )
