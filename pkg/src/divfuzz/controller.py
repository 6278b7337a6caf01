"""Rule-based reference controller standing in for the ADS under test.

Lane following uses pure pursuit, longitudinal control is IDM gap keeping,
lane changes happen when the route requires them or a slow lead vehicle can
be overtaken, and crossing traffic is yielded to with a time-to-conflict check.

The planner keeps a few simplifications on purpose so that adversarial NPC
motion can provoke violations:

* vehicles slower than ``static_speed`` are treated as parked: no motion
  prediction and no yielding, only their current footprint counts;
* a lane change, once started, is never re-checked or aborted, and the rear
  gap test looks at positions only (closing speed is ignored);
* the yield check extrapolates NPCs at constant velocity along their heading,
  so accelerating or turning vehicles are mis-predicted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .roadmap import MapModel, RefPath
from .simulator import A_MAX, A_MIN, STEER_MAX, ControllerCommand, WorldView
from .geometry import Pose2D, normalize_angle


@dataclass(frozen=True)
class ReferenceControllerConfig:
    cruise_speed: float = 12.0
    idm_accel: float = 2.5
    idm_decel: float = 3.0
    headway: float = 1.2
    min_gap: float = 2.0
    static_speed: float = 0.5
    lookahead_min: float = 6.0
    lookahead_gain: float = 0.6
    lane_change_lookahead: float = 14.0
    cut_in_horizon: tuple[float, ...] = (0.5, 1.0, 1.5)
    yield_horizon: float = 45.0
    yield_window: float = 2.0
    yield_stop_offset: float = 4.5
    crossing_angle: float = math.radians(30.0)
    lc_front_gap: float = 12.0
    lc_rear_gap: float = 6.0
    overtake_ratio: float = 0.6
    overtake_range: float = 25.0
    stop_decel: float = 2.5


class _Run:
    """A successor-linked chain of lanes driven without lateral change."""

    def __init__(self, m: MapModel, lane_ids):
        self.lane_ids = list(lane_ids)
        pts = np.concatenate([m.lanes[lid].centerline.points for lid in self.lane_ids])
        self.path = RefPath(pts).resampled(1.0)
        bounds = [0.0]
        for lid in self.lane_ids:
            bounds.append(bounds[-1] + m.lanes[lid].path.length)
        self.bounds = np.array(bounds)

    def lane_at(self, s: float) -> str:
        i = int(np.clip(np.searchsorted(self.bounds, s, side="right") - 1, 0, len(self.lane_ids) - 1))
        return self.lane_ids[i]


class ReferenceController:
    def __init__(self, config: ReferenceControllerConfig | None = None):
        self.cfg = config or ReferenceControllerConfig()
        self._runs: list[_Run] | None = None
        self._run_idx = 0
        self._active: _Run | None = None
        self._overtaking = False
        self._committed = False
        self._m: MapModel | None = None

    # -- planning ------------------------------------------------------------

    def _plan(self, view: WorldView):
        m = view.map
        self._m = m
        ego = view.frame.ego.pose
        seq = m.plan_lanes(ego, view.destination)
        if seq is None:
            hits = m.locate(ego.xy, ego.heading)
            seq = (hits[0][0],) if hits else (min(m.lanes, key=lambda lid: abs(m.lanes[lid].path.project(ego.xy)[1])),)
        runs, cur = [], [seq[0]]
        for a, b in zip(seq, seq[1:]):
            if b in m.lanes[a].successors:
                cur.append(b)
            else:
                runs.append(cur)
                cur = [b]
        runs.append(cur)
        self._runs = [_Run(m, r) for r in runs]
        self._run_idx = 0
        self._active = self._runs[0]

    def _chain_for_lane(self, lane_id: str) -> _Run:
        ids = [lane_id]
        while self._m.lanes[ids[-1]].successors and len(ids) < 8:
            ids.append(self._m.lanes[ids[-1]].successors[0])
        return _Run(self._m, ids)

    # -- helpers -------------------------------------------------------------

    def _gap_ok(self, path: RefPath, ego_xy, lane_width, view, pos, ego_len) -> bool:
        if len(pos) == 0:
            return True
        s_e, _ = path.project(ego_xy)
        s_n, d_n = path.project_many(pos)
        for j, (sn, dn) in enumerate(zip(s_n, d_n)):
            if abs(dn) > lane_width / 2 + 0.5:
                continue
            half = 0.5 * (ego_len + view.npc_sizes[j][0])
            ds = sn - s_e
            if ds >= 0 and ds - half < self.cfg.lc_front_gap:
                return False
            if ds < 0 and -ds - half < self.cfg.lc_rear_gap:
                return False
        return True

    def _idm(self, v: float, v_lead: float, gap: float) -> float:
        c = self.cfg
        s_star = c.min_gap + v * c.headway + v * (v - v_lead) / (2 * math.sqrt(c.idm_accel * c.idm_decel))
        return c.idm_accel * (1 - (v / c.cruise_speed) ** 4 - (max(s_star, 0.0) / max(gap, 0.1)) ** 2)

    # -- main step -----------------------------------------------------------

    def step(self, view: WorldView) -> ControllerCommand:
        c = self.cfg
        if self._runs is None:
            self._plan(view)
        m = self._m
        ego = view.frame.ego
        x, y, h, v = ego.pose.x, ego.pose.y, ego.pose.heading, ego.velocity
        ego_len, ego_w = view.ego_size
        npcs = view.frame.npcs
        pos = np.array([(n.pose.x, n.pose.y) for n in npcs]).reshape(-1, 2)
        hdg = np.array([n.pose.heading for n in npcs])
        spd = np.array([n.velocity for n in npcs])

        path = self._active.path
        s_e, d_e = path.project((x, y))
        if self._committed and abs(d_e) < 0.3:
            self._committed = False

        # lateral decisions
        lane_id = self._active.lane_at(s_e)
        lane = m.lanes[lane_id]
        if not self._committed and v > 2.0:
            nxt = self._runs[self._run_idx + 1] if self._run_idx + 1 < len(self._runs) else None
            home = self._runs[self._run_idx]
            if self._overtaking:
                if self._gap_ok(home.path, (x, y), lane.width, view, pos, ego_len):
                    self._switch(home, overtaking=False)
            elif nxt is not None and nxt.lane_ids[0] in [n.lane for n in lane.neighbors() if n.crossable]:
                if self._gap_ok(nxt.path, (x, y), lane.width, view, pos, ego_len):
                    self._run_idx += 1
                    self._switch(nxt, overtaking=False)
            else:
                lead = self._lead(path, s_e, pos, hdg, spd, view, ego_w, ego_len)
                if lead is not None and lead[1] < c.overtake_ratio * c.cruise_speed and lead[0] < c.overtake_range:
                    for nb in lane.neighbors():
                        if not nb.crossable:
                            continue
                        other = m.lanes[nb.lane]
                        s_o = other.path.project((x, y))[0]
                        if abs(normalize_angle(other.path.heading_at(s_o) - h)) > math.pi / 4:
                            continue
                        cand = self._chain_for_lane(nb.lane)
                        if self._gap_ok(cand.path, (x, y), other.width, view, pos, ego_len):
                            self._switch(cand, overtaking=True)
                            break
            path = self._active.path
            s_e, d_e = path.project((x, y))

        # longitudinal
        accel = c.idm_accel * (1 - (v / c.cruise_speed) ** 4)
        lead = self._lead(path, s_e, pos, hdg, spd, view, ego_w, ego_len)
        if lead is not None:
            accel = min(accel, self._idm(v, lead[1], lead[0]))
        accel = min(accel, self._yield(path, s_e, v, pos, hdg, spd, ego_len))
        accel = min(accel, self._destination(path, s_e, v, view.destination))

        # lateral control: pure pursuit on the active path
        ld = max(c.lane_change_lookahead, v) if self._committed else max(c.lookahead_min, c.lookahead_gain * v)
        s_t = s_e + ld
        if s_t <= path.length:
            tx, ty = path.point_at(s_t)
        else:
            ex, ey = path.point_at(path.length)
            hh = path.heading_at(path.length)
            tx, ty = ex + (s_t - path.length) * math.cos(hh), ey + (s_t - path.length) * math.sin(hh)
        alpha = normalize_angle(math.atan2(ty - y, tx - x) - h)
        dist = max(math.hypot(tx - x, ty - y), 1e-3)
        steer = math.atan2(2.0 * view.wheelbase * math.sin(alpha), dist)
        return ControllerCommand(min(max(accel, A_MIN), A_MAX), min(max(steer, -STEER_MAX), STEER_MAX))

    def _switch(self, run: _Run, overtaking: bool):
        self._active = run
        self._overtaking = overtaking
        self._committed = True

    def _lead(self, path, s_e, pos, hdg, spd, view, ego_w, ego_len):
        """Closest blocking vehicle ahead as (gap, speed along path), or None."""
        if len(pos) == 0:
            return None
        c = self.cfg
        s_n, d_n = path.project_many(pos)
        best = None
        for j in range(len(pos)):
            ds = s_n[j] - s_e
            if ds <= 0 or ds > 80:
                continue
            length, width = view.npc_sizes[j]
            corridor = 0.5 * (ego_w + width) + 0.25
            moving = spd[j] >= c.static_speed
            blocking = abs(d_n[j]) < corridor
            if not blocking and moving:
                ts = np.array(c.cut_in_horizon)
                fut = pos[j] + spd[j] * ts[:, None] * np.array([math.cos(hdg[j]), math.sin(hdg[j])])
                fs, fd = path.project_many(fut)
                blocking = bool(np.any((np.abs(fd) < corridor) & (fs > s_e)))
            if not blocking:
                continue
            v_along = spd[j] * math.cos(hdg[j] - path.heading_at(s_n[j])) if moving else 0.0
            gap = ds - 0.5 * (ego_len + length)
            if best is None or gap < best[0]:
                best = (gap, max(v_along, 0.0))
        return best

    def _yield(self, path, s_e, v, pos, hdg, spd, ego_len) -> float:
        c = self.cfg
        if len(pos) == 0:
            return math.inf
        lo = np.searchsorted(path.s, s_e)
        hi = np.searchsorted(path.s, s_e + c.yield_horizon)
        if hi - lo < 1:
            return math.inf
        a = path.points[max(lo - 1, 0):hi]
        b = path.points[max(lo - 1, 0) + 1:hi + 1]
        seg_s = path.s[max(lo - 1, 0):hi]
        accel = math.inf
        for j in range(len(pos)):
            if spd[j] < c.static_speed:
                continue
            reach = min(60.0, 6.0 * spd[j])
            d = np.array([math.cos(hdg[j]), math.sin(hdg[j])])
            p, q = pos[j], pos[j] + reach * d
            r = b - a
            denom = r[:, 0] * d[1] - r[:, 1] * d[0]
            with np.errstate(divide="ignore", invalid="ignore"):
                ap = p - a
                t = (ap[:, 0] * d[1] - ap[:, 1] * d[0]) / denom
                u = (ap[:, 0] * r[:, 1] - ap[:, 1] * r[:, 0]) / denom
            hit = (np.abs(denom) > 1e-9) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= reach)
            if not hit.any():
                continue
            i = int(np.argmax(hit))
            s_c = seg_s[i] + t[i] * np.hypot(*r[i])
            if abs(normalize_angle(hdg[j] - path.heading_at(s_c))) < c.crossing_angle:
                continue
            t_npc = u[i] / spd[j]
            t_ego = (s_c - s_e) / max(v, 3.0)
            if abs(t_npc - t_ego) > c.yield_window:
                continue
            gap = s_c - c.yield_stop_offset - s_e - 0.5 * ego_len
            if gap < v * v / (2 * 6.0):
                continue  # too late to stop comfortably: commit
            accel = min(accel, self._idm(v, 0.0, gap))
        return accel

    def _destination(self, path: RefPath, s_e: float, v: float, dest) -> float:
        s_d, d_d = path.project(dest)
        if abs(d_d) > 1.0:
            return math.inf
        rem = s_d - s_e - 0.3
        if rem <= 0:
            return A_MIN if v > 0 else 0.0
        v_des = min(self.cfg.cruise_speed, math.sqrt(2 * self.cfg.stop_decel * rem))
        if v > v_des:
            return -min(-A_MIN, v * v / (2 * max(rem, 0.1)))
        return 1.5 * (v_des - v)


def make_controller(name: str = "reference"):
    """Factory lookup used by the CLI: ``reference`` or ``module:attribute``."""
    if name == "reference":
        return ReferenceController
    if ":" in name:
        import importlib

        mod, attr = name.split(":", 1)
        return getattr(importlib.import_module(mod), attr)
    raise ValueError(f"unknown controller {name!r}")
