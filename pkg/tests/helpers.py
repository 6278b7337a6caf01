"""Scenario-building shortcuts shared by the tests."""
import numpy as np

from divfuzz.scenario import NpcConfig, Waypoint


def npc_on_route(m, name, speeds):
    """NPC on the named spawn route with evenly spaced waypoints carrying ``speeds``."""
    route = next(r for r in m.spawn_routes if r.name == name)
    path = m.route_path(route)
    s = np.linspace(0.0, path.length, len(speeds))
    return NpcConfig(route, tuple(Waypoint(tuple(p), v) for p, v in zip(path.points_at(s), speeds)))
