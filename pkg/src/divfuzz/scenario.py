"""Scenario genome (ego task + NPC routes and waypoints) and its YAML file format."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .geometry import Pose2D
from .roadmap import MapModel, Route, route_from_dict, route_to_dict

V_MAX = 25.0
MAX_NPC = 5
DEFAULT_FOOTPRINT = (4.7, 2.06)


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Waypoint:
    position: tuple[float, float]
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "speed", float(self.speed))


@dataclass(frozen=True)
class NpcConfig:
    route: Route
    waypoints: tuple[Waypoint, ...]
    length: float = DEFAULT_FOOTPRINT[0]
    width: float = DEFAULT_FOOTPRINT[1]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))


@dataclass(frozen=True)
class Scenario:
    id: str
    map_ref: str
    ego_start: Pose2D
    ego_destination: tuple[float, float]
    npcs: tuple[NpcConfig, ...]
    duration_limit: float = 60.0
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "npcs", tuple(self.npcs))
        d = self.ego_destination
        object.__setattr__(self, "ego_destination", (float(d[0]), float(d[1])))

    def with_npcs(self, npcs, new_id: str | None = None) -> "Scenario":
        return replace(self, npcs=tuple(npcs), id=new_id or self.id)


def validate(s: Scenario, m: MapModel, v_max: float = V_MAX, max_npc: int = MAX_NPC) -> list[str]:
    """Human-readable invariant violations; an empty list means valid."""
    out: list[str] = []
    if s.map_ref != m.name:
        out.append(f"scenario references map {s.map_ref!r} but was checked against {m.name!r}")
    if not s.duration_limit > 0:
        out.append(f"duration_limit must be > 0, got {s.duration_limit}")
    if not 1 <= len(s.npcs) <= max_npc:
        out.append(f"number of NPCs must be in [1, {max_npc}], got {len(s.npcs)}")
    if not m.locate(s.ego_start.xy, s.ego_start.heading):
        out.append("ego start does not lie on any lane")
    elif m.plan_lanes(s.ego_start, s.ego_destination) is None:
        out.append("ego destination is not reachable from ego start via the lane graph")
    for i, npc in enumerate(s.npcs):
        out.extend(f"npc {i}: {msg}" for msg in _validate_npc(npc, m, v_max))
    return out


def _validate_npc(npc: NpcConfig, m: MapModel, v_max: float) -> list[str]:
    out = []
    r = npc.route
    if not (npc.length > 0 and npc.width > 0):
        out.append("footprint dimensions must be > 0")
    if len(npc.waypoints) < 2:
        out.append(f"needs at least 2 waypoints, got {len(npc.waypoints)}")
    for j, wp in enumerate(npc.waypoints):
        if not 0.0 <= wp.speed <= v_max:
            out.append(f"waypoint {j}: speed {wp.speed} outside [0, {v_max}]")
    if not r.lane_sequence:
        out.append("route has an empty lane_sequence")
        return out
    unknown = [lid for lid in r.lane_sequence if lid not in m.lanes]
    if unknown:
        out.append(f"route references unknown lanes {unknown}")
        return out
    for a, b in zip(r.lane_sequence, r.lane_sequence[1:]):
        if not m.linked(a, b):
            out.append(f"route lane_sequence disconnected between {a} and {b}")
    if out:
        return out
    first = m.lanes[r.lane_sequence[0]]
    last = m.lanes[r.lane_sequence[-1]]
    if first.id not in [h[0] for h in m.locate(r.start.xy, r.start.heading)]:
        out.append(f"route start does not lie on its first lane {first.id}")
    if last.id not in [h[0] for h in m.locate(r.goal)]:
        out.append(f"route goal does not lie on its last lane {last.id}")
    if out or len(npc.waypoints) < 2:
        return out
    path = m.route_path(r)
    s_prev = -1.0
    for j, wp in enumerate(npc.waypoints):
        s, _ = path.project(wp.position)
        if s < s_prev - 1e-6:
            out.append(f"waypoint {j} is behind waypoint {j - 1} along the route")
        s_prev = max(s_prev, s)
    return out


# -- file format -------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "map": s.map_ref,
        "duration_limit": s.duration_limit,
        "ego": {
            "start": {"x": s.ego_start.x, "y": s.ego_start.y, "heading": s.ego_start.heading},
            "destination": {"x": s.ego_destination[0], "y": s.ego_destination[1]},
        },
        "npcs": [
            {
                "route": route_to_dict(n.route),
                "footprint": {"length": n.length, "width": n.width},
                "waypoints": [{"x": w.position[0], "y": w.position[1], "speed": w.speed} for w in n.waypoints],
            }
            for n in s.npcs
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        npcs = []
        for n in d.get("npcs", []):
            fp = n.get("footprint", {})
            npcs.append(NpcConfig(
                route=route_from_dict(n["route"]),
                waypoints=tuple(Waypoint((float(w["x"]), float(w["y"])), float(w["speed"])) for w in n["waypoints"]),
                length=float(fp.get("length", DEFAULT_FOOTPRINT[0])),
                width=float(fp.get("width", DEFAULT_FOOTPRINT[1])),
            ))
        ego = d["ego"]
        return Scenario(
            id=str(d["id"]),
            map_ref=str(d["map"]),
            ego_start=Pose2D(float(ego["start"]["x"]), float(ego["start"]["y"]), float(ego["start"].get("heading", 0.0))),
            ego_destination=(float(ego["destination"]["x"]), float(ego["destination"]["y"])),
            npcs=tuple(npcs),
            duration_limit=float(d.get("duration_limit", 60.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario document: {exc!r}") from exc


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_scenario(s))


def load_scenario(path, m: MapModel | None = None) -> Scenario:
    """Parse a scenario file; validate against ``m`` (or the referenced shipped map)."""
    from .roadmap import load_map

    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"cannot parse {path}: expected a mapping at top level")
    s = scenario_from_dict(doc)
    if m is None:
        m = load_map(s.map_ref)
    problems = validate(s, m)
    if problems:
        raise ScenarioError(f"invalid scenario {s.id}: " + "; ".join(problems))
    return s


def shipped_seeds(map_name: str, m: MapModel | None = None) -> list[Scenario]:
    """The initial seed scenarios bundled for a shipped map, in file-name order."""
    from importlib import resources

    folder = resources.files("divfuzz") / "data" / "seeds" / map_name
    if not folder.is_dir():
        raise FileNotFoundError(f"no shipped seeds for map {map_name!r}")
    files = sorted((f for f in folder.iterdir() if f.name.endswith(".yaml")), key=lambda f: f.name)
    with resources.as_file(folder) as path:
        return [load_scenario(path / f.name, m) for f in files]
