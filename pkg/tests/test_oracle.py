import dataclasses
import math

import numpy as np
import pytest

from divfuzz.controller import ReferenceController
from divfuzz.geometry import OrientedBox, Polyline, Pose2D, box_to_box_distance, box_to_polyline_distance
from divfuzz.oracle import DISTANCE_CAP, Result, Spec, VerdictReport, destination_degree, evaluate
from divfuzz.roadmap import MapModel
from divfuzz.simulator import Frame, ObservationTrace, Termination, VehicleState, simulate

from helpers import npc_on_route

SIZE = (4.7, 2.06)


def make_trace(ego, npcs=()):
    """ego: (N, 3) poses; npcs: list of (N, 3) poses."""
    frames = []
    for i, (x, y, h) in enumerate(ego):
        others = tuple(VehicleState(Pose2D(*n[i]), 0.0) for n in npcs)
        frames.append(Frame(0.1 * i, VehicleState(Pose2D(x, y, h), 0.0), others))
    return ObservationTrace("t", frames, Termination.TIME_LIMIT, SIZE, tuple(SIZE for _ in npcs))


def open_map(lines=()):
    return MapModel("open", {}, [Polyline(l) for l in lines], [])


@pytest.fixture
def scenario(s1_seeds):
    return dataclasses.replace(s1_seeds[0], ego_destination=(10.0, 0.0))


def test_pass_at_destination_far_from_everything(scenario):
    ego = np.array([[0.0, 0, 0], [5.0, 0, 0], [10.0, 0, 0]])
    npc = ego + [0.0, 200.0, 0.0]
    v = evaluate(make_trace(ego, [npc]), scenario, open_map([[(-100, 120), (100, 120)]]))
    assert v.result is Result.PASS and not v.violated_specs
    assert v.f_destination == 10.0
    assert v.f_collision == DISTANCE_CAP and v.f_lines == DISTANCE_CAP
    assert v.raw_collision > DISTANCE_CAP
    assert v.violation_degree == v.f_collision + v.f_lines + v.f_destination


def test_collision_failure(scenario):
    ego = np.array([[0.0, 0, 0], [5.0, 0, 0], [10.0, 0, 0]])
    npc = np.array([[20.0, 0, 0], [8.0, 0, 0], [30.0, 0, 0]])
    v = evaluate(make_trace(ego, [npc]), scenario, open_map())
    assert v.failed and Spec.COLLISION in v.violated_specs
    assert v.f_collision == 0.0
    assert v.violated_names() == ["Collision"]


def test_short_of_destination(scenario):
    ego = np.array([[-5.0, 0, 0], [-1.0, 0, 0]])
    v = evaluate(make_trace(ego), scenario, open_map())
    assert v.f_destination == 0.0
    assert v.violated_specs == frozenset({Spec.DESTINATION})


def test_line_hit(scenario):
    ego = np.array([[0.0, 0, 0], [5.0, 0, 0], [10.0, 0, 0]])
    v = evaluate(make_trace(ego), scenario, open_map([[(5, -10), (5, 10)]]))
    assert Spec.ILLEGAL_LINE in v.violated_specs and v.f_lines == 0.0


def test_uncapped_mode(scenario):
    ego = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    npc = ego + [0.0, 300.0, 0.0]
    v = evaluate(make_trace(ego, [npc]), scenario, open_map(), cap=False)
    assert v.f_collision == pytest.approx(300.0 - SIZE[1], abs=1e-9)
    assert math.isinf(v.f_lines)


def test_destination_degree_range():
    for d in np.linspace(0, 40, 401):
        f = destination_degree(d)
        assert 0.0 <= f <= 10.0
        assert f == max(10.0 - d, 0.0)


def direct_verdict(trace, dest, lines):
    """Frame-by-frame re-evaluation with the scalar geometry API."""
    d_b = math.inf
    d_l = math.inf
    for f in trace.frames:
        ego = OrientedBox(f.ego.pose, *SIZE)
        for n in f.npcs:
            d_b = min(d_b, box_to_box_distance(ego, OrientedBox(n.pose, *SIZE)))
        for line in lines:
            d_l = min(d_l, box_to_polyline_distance(ego, line))
    last = trace.frames[-1].ego.pose
    d_dest = math.hypot(last.x - dest[0], last.y - dest[1])
    failed = d_b == 0.0 or d_l == 0.0 or d_dest > 1.0
    return failed, d_b, d_l, d_dest


def test_failure_biconditional_randomized(rng, scenario):
    lines = [Polyline([(-30, 6), (30, 6)]), Polyline([(3, -30), (4, 30)])]
    m = open_map([l.points for l in lines])
    for _ in range(200):
        n = int(rng.integers(2, 8))
        ego = np.column_stack([rng.uniform(-15, 15, (n, 2)), rng.uniform(-3, 3, n)])
        npcs = [np.column_stack([rng.uniform(-15, 15, (n, 2)), rng.uniform(-3, 3, n)]) for _ in range(2)]
        trace = make_trace(ego, npcs)
        v = evaluate(trace, scenario, m)
        failed, d_b, d_l, d_dest = direct_verdict(trace, scenario.ego_destination, lines)
        assert v.failed == failed
        assert v.raw_collision == pytest.approx(d_b, abs=1e-9)
        assert v.raw_lines == pytest.approx(d_l, abs=1e-9)
        assert v.destination_distance == pytest.approx(d_dest, abs=1e-12)
        assert 0.0 <= v.f_destination <= 10.0


def test_collision_degree_monotone(scenario):
    ego = np.array([[0.0, 0, 0], [5.0, 0, 0]])
    prev = math.inf
    for gap in (20.0, 10.0, 5.0, 3.0, 2.1):
        npc = ego + [0.0, gap, 0.0]
        f = evaluate(make_trace(ego, [npc]), scenario, open_map()).f_collision
        assert f <= prev
        prev = f


def test_violating_trace_has_lower_degree(scenario):
    ego_ok = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    ok = evaluate(make_trace(ego_ok, [ego_ok + [0, 10, 0]]), scenario, open_map([[(-50, 20), (50, 20)]]))
    ego_bad = np.array([[0.0, 0, 0], [2.0, 0, 0]])
    bad = evaluate(make_trace(ego_bad, [ego_bad + [3, 0, 0]]), scenario, open_map([[(-50, 1.5), (50, 1.5)]]))
    assert bad.failed and not ok.failed
    assert bad.violation_degree < ok.violation_degree


def test_report_roundtrip(scenario):
    ego = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    v = evaluate(make_trace(ego, [ego + [0, 7, 0]]), scenario, open_map())
    assert VerdictReport.from_dict(v.to_dict()) == v


def test_reference_controller_outcomes(s1, s1_seeds):
    # a parked car blocking the ego lane: the controller waits behind it until time runs out
    blocked = dataclasses.replace(s1_seeds[0].with_npcs([npc_on_route(s1, "E-straight-25", [0.0] * 5)]),
                                  duration_limit=20.0)
    v = evaluate(simulate(blocked, s1, ReferenceController()), blocked, s1)
    assert v.violated_specs == frozenset({Spec.DESTINATION})
    # a crossing vehicle that accelerates through the junction is mis-predicted
    crossing = s1_seeds[0].with_npcs([npc_on_route(s1, "W-straight-70", [12.0] * 5),
                                      npc_on_route(s1, "W-left-25", [3.0, 5.0, 7.0, 9.0, 11.0])])
    v = evaluate(simulate(crossing, s1, ReferenceController()), crossing, s1)
    assert Spec.COLLISION in v.violated_specs
