"""Deterministic fixed-step 2D traffic simulation producing observation traces."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .geometry import Pose2D, box_corners, boxes_overlap_fast, normalize_angle
from .roadmap import MapModel, RefPath
from .scenario import NpcConfig, Scenario

A_MIN, A_MAX = -8.0, 4.0
STEER_MAX = 0.6


class Termination(str, enum.Enum):
    TIME_LIMIT = "TimeLimit"
    DESTINATION_REACHED = "DestinationReached"
    COLLISION_DETECTED = "CollisionDetected"
    LINE_HIT_DETECTED = "LineHitDetected"  # reserved: line hits are recorded, never terminal


@dataclass(frozen=True)
class VehicleState:
    pose: Pose2D
    velocity: float
    acceleration: float = 0.0


@dataclass(frozen=True)
class Frame:
    timestamp: float
    ego: VehicleState
    npcs: tuple[VehicleState, ...]


@dataclass
class ObservationTrace:
    scenario_id: str
    frames: list[Frame]
    termination: Termination
    ego_size: tuple[float, float] = (4.7, 2.06)
    npc_sizes: tuple[tuple[float, float], ...] = ()

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([f.timestamp for f in self.frames])

    def ego_array(self) -> np.ndarray:
        """(N, 5) array of ego x, y, heading, velocity, acceleration."""
        return np.array([(f.ego.pose.x, f.ego.pose.y, f.ego.pose.heading, f.ego.velocity, f.ego.acceleration)
                         for f in self.frames])

    def npc_array(self, k: int) -> np.ndarray:
        return np.array([(f.npcs[k].pose.x, f.npcs[k].pose.y, f.npcs[k].pose.heading,
                          f.npcs[k].velocity, f.npcs[k].acceleration) for f in self.frames])

    def to_dict(self) -> dict:
        def vs(v: VehicleState):
            return [v.pose.x, v.pose.y, v.pose.heading, v.velocity, v.acceleration]

        return {
            "scenario_id": self.scenario_id,
            "termination": self.termination.value,
            "ego_size": list(self.ego_size),
            "npc_sizes": [list(s) for s in self.npc_sizes],
            "frames": [{"t": f.timestamp, "ego": vs(f.ego), "npcs": [vs(n) for n in f.npcs]} for f in self.frames],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationTrace":
        def vs(a):
            return VehicleState(Pose2D(a[0], a[1], a[2]), a[3], a[4])

        frames = [Frame(fr["t"], vs(fr["ego"]), tuple(vs(n) for n in fr["npcs"])) for fr in d["frames"]]
        return cls(d["scenario_id"], frames, Termination(d["termination"]),
                   tuple(d.get("ego_size", (4.7, 2.06))), tuple(tuple(s) for s in d.get("npc_sizes", ())))


def save_trace(trace: ObservationTrace, path, verdict=None) -> None:
    doc = trace.to_dict()
    if verdict is not None:
        doc["verdict"] = verdict.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_trace(path) -> tuple[ObservationTrace, dict | None]:
    with open(path) as fh:
        doc = json.load(fh)
    return ObservationTrace.from_dict(doc), doc.get("verdict")


@dataclass(frozen=True)
class ControllerCommand:
    target_acceleration: float
    target_steering: float


@dataclass(frozen=True)
class WorldView:
    """Ground-truth input handed to the ADS under test (perception bypassed)."""

    frame: Frame
    map: MapModel
    destination: tuple[float, float]
    ego_size: tuple[float, float]
    npc_sizes: tuple[tuple[float, float], ...]
    wheelbase: float


class AdsController(Protocol):
    def step(self, view: WorldView) -> ControllerCommand: ...


class ControllerFault(RuntimeError):
    """The controller produced a non-finite command; carries the partial trace."""

    def __init__(self, message: str, trace: ObservationTrace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.02
    record_period: float = 0.1
    control_period: float = 0.1
    v_max: float = 25.0
    wheelbase: float = 2.8
    ego_length: float = 4.7
    ego_width: float = 2.06
    destination_threshold: float = 1.0
    stop_speed: float = 0.1
    jitter: float = 0.0  # test mode: uniform +-jitter on recording instants


def bicycle_step(x: float, y: float, heading: float, v: float, accel: float, steer: float,
                 dt: float, wheelbase: float, v_max: float = 25.0) -> tuple[float, float, float, float]:
    """One explicit-Euler step of the kinematic bicycle model about the vehicle center."""
    beta = math.atan(0.5 * math.tan(steer))
    x += v * math.cos(heading + beta) * dt
    y += v * math.sin(heading + beta) * dt
    heading = normalize_angle(heading + v * math.cos(beta) * math.tan(steer) / wheelbase * dt)
    v = min(max(v + accel * dt, 0.0), v_max)
    return x, y, heading, v


class NpcTrack:
    """Open-loop playback path of one NPC: route reference displaced by waypoint offsets."""

    def __init__(self, path: RefPath, knots_s: np.ndarray, knots_v: np.ndarray):
        self.path = path
        self.knots_s = knots_s
        self.knots_v = knots_v

    @classmethod
    def build(cls, npc: NpcConfig, m: MapModel) -> "NpcTrack":
        ref = m.route_path(npc.route)
        sd = np.array([ref.project(w.position) for w in npc.waypoints])
        s_ref, d = sd[:, 0], sd[:, 1]
        s_ref = np.maximum.accumulate(s_ref)
        if np.any(d != 0):
            path = ref.offset(s_ref, d)
            # map waypoint reference arc lengths onto the displaced path
            base = ref.resampled(1.0)
            knots = np.interp(s_ref, base.s, path.s)
        else:
            path, knots = ref, s_ref
        return cls(path, knots, np.array([w.speed for w in npc.waypoints]))

    def speed_at(self, sigma: float) -> float:
        if sigma >= self.path.length:
            return 0.0
        return float(np.interp(sigma, self.knots_s, self.knots_v))

    def state_at(self, sigma: float) -> tuple[float, float, float, float]:
        x, y = self.path.point_at(sigma)
        return x, y, self.path.heading_at(sigma), self.speed_at(sigma)


def npc_motion_step(track: NpcTrack, sigma: float, dt: float) -> float:
    """Advance an NPC's arc-length position along its track by one step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return min(sigma + track.speed_at(sigma) * dt, track.path.length)


def _recording_steps(n_steps: int, every: int, jitter_steps: float, rng) -> list[int]:
    base = list(range(0, n_steps + 1, every))
    if base[-1] != n_steps:
        base.append(n_steps)
    if jitter_steps <= 0:
        return base
    out = [0]
    for k in base[1:-1]:
        j = int(round(k + rng.uniform(-jitter_steps, jitter_steps)))
        if out[-1] < j < n_steps:
            out.append(j)
    out.append(n_steps)
    return out


def simulate(s: Scenario, m: MapModel, controller: AdsController, rng_seed: int = 0,
             config: SimConfig | None = None) -> ObservationTrace:
    """Run one scenario to termination and return its observation trace."""
    cfg = config or SimConfig()
    rng = np.random.default_rng(rng_seed)
    dt = cfg.dt
    n_steps = max(1, int(round(s.duration_limit / dt)))
    rec_every = max(1, int(round(cfg.record_period / dt)))
    ctrl_every = max(1, int(round(cfg.control_period / dt)))
    rec_steps = _recording_steps(n_steps, rec_every, cfg.jitter / dt, rng)
    rec_set = set(rec_steps)

    tracks = [NpcTrack.build(n, m) for n in s.npcs]
    sizes = tuple((n.length, n.width) for n in s.npcs)
    ego_size = (cfg.ego_length, cfg.ego_width)
    ego_r = 0.5 * math.hypot(*ego_size)
    npc_r = [0.5 * math.hypot(*sz) for sz in sizes]

    ex, ey, eh, ev = s.ego_start.x, s.ego_start.y, s.ego_start.heading, 0.0
    sig = [0.0] * len(tracks)
    npc_pose = [t.state_at(0.0) for t in tracks]
    cmd = ControllerCommand(0.0, 0.0)
    dest = s.ego_destination

    frames: list[Frame] = []
    last_v: list[float] = []

    def record(k: int):
        t = k * dt
        vels = [ev] + [p[3] for p in npc_pose]
        if frames:
            span = t - frames[-1].timestamp
            accs = [(v - lv) / span for v, lv in zip(vels, last_v)]
        else:
            accs = [0.0] * len(vels)
        ego = VehicleState(Pose2D(ex, ey, eh), ev, accs[0])
        npcs = tuple(VehicleState(Pose2D(p[0], p[1], p[2]), p[3], a) for p, a in zip(npc_pose, accs[1:]))
        frames.append(Frame(t, ego, npcs))
        last_v[:] = vels

    def collided() -> bool:
        ce = None
        for p, (ln, wd), r in zip(npc_pose, sizes, npc_r):
            if math.hypot(p[0] - ex, p[1] - ey) > ego_r + r:
                continue
            if ce is None:
                ce = box_corners(ex, ey, eh, *ego_size)
            if boxes_overlap_fast(ce, box_corners(p[0], p[1], p[2], ln, wd)):
                return True
        return False

    def arrived() -> bool:
        return math.hypot(ex - dest[0], ey - dest[1]) <= cfg.destination_threshold and abs(ev) < cfg.stop_speed

    def finish(k: int, term: Termination) -> ObservationTrace:
        if not frames or frames[-1].timestamp != k * dt:
            if k in rec_set:
                record(k)
            else:
                record(min(r for r in rec_steps if r > k) if k < rec_steps[-1] else k)
        if len(frames) < 2:
            record(rec_steps[1] if len(rec_steps) > 1 else k + rec_every)
        return ObservationTrace(s.id, frames, term, ego_size, sizes)

    def check(k: int):
        if collided():
            return Termination.COLLISION_DETECTED
        if arrived():
            return Termination.DESTINATION_REACHED
        return None

    record(0)
    term = check(0)
    if term is not None:
        return finish(0, term)

    for k in range(1, n_steps + 1):
        if (k - 1) % ctrl_every == 0:
            view = WorldView(
                Frame((k - 1) * dt, VehicleState(Pose2D(ex, ey, eh), ev),
                      tuple(VehicleState(Pose2D(p[0], p[1], p[2]), p[3]) for p in npc_pose)),
                m, dest, ego_size, sizes, cfg.wheelbase)
            cmd = controller.step(view)
            if not (math.isfinite(cmd.target_acceleration) and math.isfinite(cmd.target_steering)):
                raise ControllerFault(f"non-finite controller command {cmd} at t={(k - 1) * dt:.2f}s",
                                      ObservationTrace(s.id, list(frames), Termination.TIME_LIMIT, ego_size, sizes))
        acc = min(max(cmd.target_acceleration, A_MIN), A_MAX)
        steer = min(max(cmd.target_steering, -STEER_MAX), STEER_MAX)
        ex, ey, eh, ev = bicycle_step(ex, ey, eh, ev, acc, steer, dt, cfg.wheelbase, cfg.v_max)
        for i, tr in enumerate(tracks):
            sig[i] = npc_motion_step(tr, sig[i], dt)
            npc_pose[i] = tr.state_at(sig[i])
        term = check(k)
        if term is not None:
            return finish(k, term)
        if k in rec_set:
            record(k)
    return ObservationTrace(s.id, frames, Termination.TIME_LIMIT, ego_size, sizes)
