"""Lane-graph road maps, reference paths and routing."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath

import numpy as np
import yaml

from .geometry import Polyline, Pose2D, normalize_angle


class RefPath:
    """Arc-length parametrized polyline used for lanes, routes and NPC tracks."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.hypot(*np.diff(pts, axis=0).T) > 1e-9
        pts = pts[keep]
        if len(pts) < 2:
            raise ValueError("path needs two distinct points")
        self.points = pts
        seg = np.diff(pts, axis=0)
        self._seg = seg
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.s = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._seg_heading = np.arctan2(seg[:, 1], seg[:, 0])

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def point_at(self, s: float) -> tuple[float, float]:
        return (float(np.interp(s, self.s, self.points[:, 0])),
                float(np.interp(s, self.s, self.points[:, 1])))

    def points_at(self, s: np.ndarray) -> np.ndarray:
        return np.stack([np.interp(s, self.s, self.points[:, 0]),
                         np.interp(s, self.s, self.points[:, 1])], axis=-1)

    def _segment_index(self, s):
        return np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self._seg) - 1)

    def heading_at(self, s: float) -> float:
        return float(self._seg_heading[self._segment_index(s)])

    def headings_at(self, s: np.ndarray) -> np.ndarray:
        return self._seg_heading[self._segment_index(np.asarray(s))]

    def project(self, xy) -> tuple[float, float]:
        """Closest arc length and signed lateral offset (left positive) of a point."""
        p = np.asarray(xy, dtype=float)
        a = self.points[:-1]
        rel = p - a
        t = np.clip(np.einsum("ij,ij->i", rel, self._seg) / self._seg_len**2, 0.0, 1.0)
        foot = a + t[:, None] * self._seg
        dist = np.hypot(*(p - foot).T)
        i = int(np.argmin(dist))
        s = float(self.s[i] + t[i] * self._seg_len[i])
        ux, uy = self._seg[i] / self._seg_len[i]
        side = ux * rel[i, 1] - uy * rel[i, 0]
        return s, float(math.copysign(dist[i], side) if dist[i] > 0 else 0.0)

    def project_many(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`project` for (P, 2) points."""
        p = np.asarray(pts, dtype=float).reshape(-1, 2)
        a = self.points[:-1]
        rel = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("psj,sj->ps", rel, self._seg) / self._seg_len**2, 0.0, 1.0)
        foot = a[None] + t[..., None] * self._seg[None]
        diff = p[:, None, :] - foot
        dist = np.hypot(diff[..., 0], diff[..., 1])
        i = np.argmin(dist, axis=1)
        rows = np.arange(len(p))
        s = self.s[i] + t[rows, i] * self._seg_len[i]
        u = self._seg[i] / self._seg_len[i][:, None]
        r = rel[rows, i]
        side = u[:, 0] * r[:, 1] - u[:, 1] * r[:, 0]
        return s, np.copysign(dist[rows, i], side)

    def sample(self, s0: float, s1: float) -> np.ndarray:
        """Points between arc lengths s0 and s1 including both ends and interior vertices."""
        inner = self.s[(self.s > s0) & (self.s < s1)]
        return self.points_at(np.concatenate([[s0], inner, [s1]]))

    def resampled(self, spacing: float = 1.0) -> "RefPath":
        n = max(2, int(math.ceil(self.length / spacing)) + 1)
        return RefPath(self.points_at(np.linspace(0.0, self.length, n)))

    def offset(self, s_knots, d_knots, spacing: float = 1.0) -> "RefPath":
        """Path displaced laterally by an offset linearly interpolated over arc length."""
        base = self.resampled(spacing)
        s = base.s
        d = np.interp(s, s_knots, d_knots)
        h = np.empty(len(s))
        h[:-1] = base._seg_heading
        h[-1] = base._seg_heading[-1]
        # vertex normals from averaged neighbor headings
        if len(s) > 2:
            hv = base._seg_heading
            h[1:-1] = np.arctan2(np.sin(hv[:-1]) + np.sin(hv[1:]), np.cos(hv[:-1]) + np.cos(hv[1:]))
        normal = np.stack([-np.sin(h), np.cos(h)], axis=-1)
        return RefPath(base.points + d[:, None] * normal)


@dataclass(frozen=True)
class Neighbor:
    lane: str
    crossable: bool


@dataclass(frozen=True, eq=False)
class Lane:
    id: str
    centerline: Polyline
    width: float
    successors: tuple[str, ...] = ()
    left: Neighbor | None = None
    right: Neighbor | None = None

    def __post_init__(self):
        object.__setattr__(self, "_path", RefPath(self.centerline.points))

    @property
    def path(self) -> RefPath:
        return self._path

    def neighbors(self):
        return [n for n in (self.left, self.right) if n is not None]


@dataclass(frozen=True)
class Route:
    start: Pose2D
    goal: tuple[float, float]
    lane_sequence: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        object.__setattr__(self, "lane_sequence", tuple(self.lane_sequence))


@dataclass(eq=False)
class MapModel:
    name: str
    lanes: dict[str, Lane]
    illegal_lines: list[Polyline]
    spawn_routes: list[Route]
    _route_cache: dict = field(default_factory=dict, repr=False)

    def check(self) -> list[str]:
        """Map-level invariant violations."""
        problems = []
        for lane in self.lanes.values():
            if not lane.width > 0:
                problems.append(f"lane {lane.id}: width must be > 0")
            for succ in lane.successors:
                if succ not in self.lanes:
                    problems.append(f"lane {lane.id}: unknown successor {succ}")
            for nb in lane.neighbors():
                if nb.lane not in self.lanes:
                    problems.append(f"lane {lane.id}: unknown neighbor {nb.lane}")
        return problems

    def linked(self, a: str, b: str) -> bool:
        """Whether a route may go from lane ``a`` directly to lane ``b``."""
        la = self.lanes[a]
        return b in la.successors or any(n.lane == b and n.crossable for n in la.neighbors())

    def locate(self, xy, heading: float | None = None, tol: float = 1e-6) -> list[tuple[str, float, float]]:
        """Lanes containing a point as (lane id, arc length, lateral offset), best fit first."""
        hits = []
        for lane in self.lanes.values():
            s, d = lane.path.project(xy)
            if abs(d) > lane.width / 2 + tol or s < -tol or s > lane.path.length + tol:
                continue
            # projection clamped to an endpoint: make sure the point is not beyond it
            if s <= tol or s >= lane.path.length - tol:
                end = lane.path.point_at(s)
                if math.hypot(xy[0] - end[0], xy[1] - end[1]) > abs(d) + tol:
                    continue
            if heading is not None:
                if abs(normalize_angle(heading - lane.path.heading_at(s))) > math.pi / 2:
                    continue
            hits.append((lane.id, s, d))
        hits.sort(key=lambda h: (abs(h[2]), h[0]))
        return hits

    def plan_lanes(self, start: Pose2D, goal) -> tuple[str, ...] | None:
        """Shortest lane sequence from a start pose to a goal point, or None."""
        starts = self.locate(start.xy, start.heading)
        goals = {lid: s for lid, s, _ in self.locate(goal)}
        for lid, s0, _ in starts:
            if lid in goals and goals[lid] >= s0 - 1e-6:
                return (lid,)
        best = None
        for lid, _, _ in starts:
            prev = {lid: None}
            queue = deque([lid])
            while queue:
                cur = queue.popleft()
                if cur in goals and cur != lid:
                    seq = [cur]
                    while prev[seq[-1]] is not None:
                        seq.append(prev[seq[-1]])
                    seq = tuple(reversed(seq))
                    if best is None or len(seq) < len(best):
                        best = seq
                    break
                lane = self.lanes[cur]
                nxt = list(lane.successors) + [n.lane for n in lane.neighbors() if n.crossable]
                for n in nxt:
                    if n not in prev:
                        prev[n] = cur
                        queue.append(n)
        return best

    def route_path(self, route: Route) -> RefPath:
        """Reference path of a route from its start to its goal (cached)."""
        key = (route.start, route.goal, route.lane_sequence)
        if key not in self._route_cache:
            self._route_cache[key] = build_route_path(self, route)
        return self._route_cache[key]


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def build_route_path(m: MapModel, route: Route, blend_max: float = 30.0) -> RefPath:
    lanes = [m.lanes[lid] for lid in route.lane_sequence]
    chunks = []
    s_cur = lanes[0].path.project(route.start.xy)[0]
    i = 0
    while True:
        lane = lanes[i]
        if i == len(lanes) - 1:
            s_end = lane.path.project(route.goal)[0]
            chunks.append(lane.path.sample(s_cur, max(s_end, s_cur)))
            break
        nxt = lanes[i + 1]
        if nxt.id in lane.successors:
            chunks.append(lane.path.sample(s_cur, lane.path.length))
            s_cur = 0.0
            i += 1
            continue
        # lateral change into a parallel neighbor lane, centered in the available span
        target = route.goal if i + 1 == len(lanes) - 1 else tuple(nxt.path.points[-1])
        span = max(lane.path.project(target)[0] - s_cur, 1.0)
        blend = min(blend_max, 0.6 * span)
        a = s_cur + span / 2 - blend / 2
        chunks.append(lane.path.sample(s_cur, a))
        u = np.linspace(0.0, 1.0, max(3, int(blend) + 1))
        src = lane.path.points_at(a + u * blend)
        dst = np.array([nxt.path.point_at(nxt.path.project(p)[0]) for p in src])
        w = _smoothstep(u)[:, None]
        chunks.append((1 - w) * src + w * dst)
        s_cur = nxt.path.project(src[-1])[0]
        i += 1
    return RefPath(np.concatenate(chunks)).resampled(1.0)


# -- serialization ---------------------------------------------------------

def _pose_to_dict(p: Pose2D) -> dict:
    return {"x": p.x, "y": p.y, "heading": p.heading}


def _pose_from_dict(d: dict) -> Pose2D:
    return Pose2D(float(d["x"]), float(d["y"]), float(d.get("heading", 0.0)))


def route_to_dict(r: Route) -> dict:
    out = {"start": _pose_to_dict(r.start), "goal": {"x": r.goal[0], "y": r.goal[1]},
           "lanes": list(r.lane_sequence)}
    if r.name:
        out["name"] = r.name
    return out


def route_from_dict(d: dict) -> Route:
    return Route(_pose_from_dict(d["start"]), (float(d["goal"]["x"]), float(d["goal"]["y"])),
                 tuple(str(x) for x in d["lanes"]), str(d.get("name", "")))


def _neighbor_to_dict(n: Neighbor | None):
    return None if n is None else {"lane": n.lane, "crossable": n.crossable}


def _neighbor_from_dict(d) -> Neighbor | None:
    return None if d is None else Neighbor(str(d["lane"]), bool(d["crossable"]))


def map_to_dict(m: MapModel) -> dict:
    return {
        "name": m.name,
        "lanes": [
            {
                "id": lane.id,
                "width": lane.width,
                "centerline": [[float(x), float(y)] for x, y in lane.centerline.points],
                "successors": list(lane.successors),
                "left": _neighbor_to_dict(lane.left),
                "right": _neighbor_to_dict(lane.right),
            }
            for lane in m.lanes.values()
        ],
        "illegal_lines": [[[float(x), float(y)] for x, y in line.points] for line in m.illegal_lines],
        "spawn_routes": [route_to_dict(r) for r in m.spawn_routes],
    }


def map_from_dict(d: dict) -> MapModel:
    lanes = {}
    for ld in d["lanes"]:
        lane = Lane(
            id=str(ld["id"]),
            centerline=Polyline(ld["centerline"]),
            width=float(ld["width"]),
            successors=tuple(str(x) for x in ld.get("successors", ())),
            left=_neighbor_from_dict(ld.get("left")),
            right=_neighbor_from_dict(ld.get("right")),
        )
        lanes[lane.id] = lane
    m = MapModel(
        name=str(d["name"]),
        lanes=lanes,
        illegal_lines=[Polyline(pts) for pts in d.get("illegal_lines", [])],
        spawn_routes=[route_from_dict(r) for r in d.get("spawn_routes", [])],
    )
    problems = m.check()
    if problems:
        raise ValueError("invalid map: " + "; ".join(problems))
    return m


def save_map(m: MapModel, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(map_to_dict(m), fh, sort_keys=False, default_flow_style=None)


_MAP_CACHE: dict[str, MapModel] = {}


def load_map(name_or_path) -> MapModel:
    """Load a map by shipped name (``s1`` .. ``s4``) or from a YAML file path."""
    p = FsPath(str(name_or_path))
    if p.suffix in (".yaml", ".yml") or p.exists():
        with open(p) as fh:
            return map_from_dict(yaml.safe_load(fh))
    name = str(name_or_path)
    if name not in _MAP_CACHE:
        ref = resources.files("divfuzz") / "data" / "maps" / f"{name}.yaml"
        if not ref.is_file():
            raise FileNotFoundError(f"no shipped map named {name!r}")
        _MAP_CACHE[name] = map_from_dict(yaml.safe_load(ref.read_text()))
    return _MAP_CACHE[name]
