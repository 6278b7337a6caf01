"""Energy-adaptive scenario mutation.

High-energy seeds get small Gaussian nudges to their NPC waypoints, low-energy
seeds get whole NPC routes resampled from the map's spawn-route library. Each
NPC is touched independently with probability ``1 - epsilon``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import OrientedBox, Pose2D, box_to_box_distance
from .roadmap import MapModel, Route
from .scenario import NpcConfig, Scenario, Waypoint, validate
from .simulator import SimConfig

log = logging.getLogger(__name__)

ROUTE = "route"
WAYPOINT = "waypoint"


@dataclass(frozen=True)
class MutationConfig:
    energy_threshold: float = 0.5
    epsilon: float = 0.5
    speed_std: float = 1.0
    lateral_std: float = 0.5
    waypoint_count: int = 5
    v_max_npc: float = 15.0
    max_retries: int = 10
    spawn_clearance: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.speed_std < 0 or self.lateral_std < 0:
            raise ValueError("mutation standard deviations must be non-negative")
        if self.waypoint_count < 2:
            raise ValueError("waypoint_count must be >= 2")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


def mutation_kind(energy: float, cfg: MutationConfig) -> str:
    return WAYPOINT if energy > cfg.energy_threshold else ROUTE


def adaptive_mutation(seed, cfg: MutationConfig, m: MapModel, rng: np.random.Generator,
                      new_id: str | None = None) -> Scenario:
    """Mutate waypoints of high-energy seeds and routes of low-energy ones."""
    if mutation_kind(seed.energy, cfg) == WAYPOINT:
        return mutate_waypoints(seed.scenario, cfg, m, rng, new_id)
    return mutate_route(seed.scenario, cfg, m, rng, new_id)


def _start_box(npc: NpcConfig, m: MapModel) -> OrientedBox:
    path = m.route_path(npc.route)
    s0, d0 = path.project(npc.waypoints[0].position)
    # playback starts at the route origin, displaced by the first waypoint's lateral offset
    x, y = path.point_at(0.0)
    h = path.heading_at(0.0)
    x, y = x - math.sin(h) * d0, y + math.cos(h) * d0
    return OrientedBox(Pose2D(x, y, h), npc.length, npc.width)


def spawn_clear(npcs, s: Scenario, m: MapModel, clearance: float, index: int) -> bool:
    """True if NPC ``index`` starts at least ``clearance`` away from the ego and the other NPCs."""
    ego = OrientedBox(s.ego_start, SimConfig.ego_length, SimConfig.ego_width)
    mine = _start_box(npcs[index], m)
    if box_to_box_distance(mine, ego) < clearance:
        return False
    return all(box_to_box_distance(mine, _start_box(n, m)) >= clearance
               for j, n in enumerate(npcs) if j != index)


def _lateral_limit(npc: NpcConfig, m: MapModel) -> float:
    width = min(m.lanes[lid].width for lid in npc.route.lane_sequence)
    return max(0.5 * (width - npc.width), 0.0)


def sample_route_npc(route: Route, template: NpcConfig, cfg: MutationConfig, m: MapModel,
                     rng: np.random.Generator) -> NpcConfig:
    """Waypoints evenly spaced in arc length along ``route`` with uniformly drawn speeds."""
    path = m.route_path(route)
    s = np.linspace(0.0, path.length, cfg.waypoint_count)
    pts = path.points_at(s)
    speeds = rng.uniform(0.0, cfg.v_max_npc, cfg.waypoint_count)
    wps = tuple(Waypoint(tuple(p), v) for p, v in zip(pts, speeds))
    return NpcConfig(route, wps, template.length, template.width)


def _finish(parent: Scenario, npcs, m: MapModel, new_id) -> Scenario:
    child = parent.with_npcs(npcs, new_id)
    problems = validate(child, m)
    if problems:
        log.warning("mutant of %s invalid (%s); keeping parent NPCs", parent.id, problems[0])
        return parent.with_npcs(parent.npcs, new_id)
    return child


def mutate_route(s: Scenario, cfg: MutationConfig, m: MapModel, rng: np.random.Generator,
                 new_id: str | None = None) -> Scenario:
    routes = m.spawn_routes
    if len(routes) < 2:
        raise ValueError(f"map {m.name!r} needs at least 2 spawn routes for route mutation")
    npcs = list(s.npcs)
    for i, npc in enumerate(s.npcs):
        if not rng.random() > cfg.epsilon:
            continue
        for _ in range(cfg.max_retries):
            route = routes[int(rng.integers(len(routes)))]
            npcs[i] = sample_route_npc(route, npc, cfg, m, rng)
            if spawn_clear(npcs, s, m, cfg.spawn_clearance, i):
                break
        else:
            log.warning("no clear spawn route for npc %d of %s after %d tries", i, s.id, cfg.max_retries)
            npcs[i] = npc
    return _finish(s, npcs, m, new_id)


def perturb_waypoints(npc: NpcConfig, cfg: MutationConfig, m: MapModel, rng: np.random.Generator) -> NpcConfig:
    """Gaussian noise on every waypoint's speed and lateral offset from the route."""
    path = m.route_path(npc.route)
    limit = _lateral_limit(npc, m)
    out = []
    for wp in npc.waypoints:
        speed = wp.speed
        if cfg.speed_std > 0:
            speed = min(max(speed + rng.normal(0.0, cfg.speed_std), 0.0), cfg.v_max_npc)
        pos = wp.position
        if cfg.lateral_std > 0:
            s, d = path.project(pos)
            d = min(max(d + rng.normal(0.0, cfg.lateral_std), -limit), limit)
            x, y = path.point_at(s)
            h = path.heading_at(s)
            pos = (x - math.sin(h) * d, y + math.cos(h) * d)
        out.append(Waypoint(pos, speed))
    return NpcConfig(npc.route, tuple(out), npc.length, npc.width)


def mutate_waypoints(s: Scenario, cfg: MutationConfig, m: MapModel, rng: np.random.Generator,
                     new_id: str | None = None) -> Scenario:
    npcs = list(s.npcs)
    for i, npc in enumerate(s.npcs):
        if not rng.random() > cfg.epsilon:
            continue
        for _ in range(cfg.max_retries):
            npcs[i] = perturb_waypoints(npc, cfg, m, rng)
            if spawn_clear(npcs, s, m, cfg.spawn_clearance, i) or not spawn_clear(
                    list(s.npcs), s, m, cfg.spawn_clearance, i):
                break
        else:
            npcs[i] = npc
    return _finish(s, npcs, m, new_id)
