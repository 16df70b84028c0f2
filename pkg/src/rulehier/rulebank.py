"""Concrete driving rules for road navigation and intersection negotiation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels
from . import world
from .hierarchy import DEFAULT_A, DEFAULT_C, Rule, RuleHierarchy
from .stl import Always, And, Eventually, Or, Predicate, steps_for

COLLISION = "no_collision"
SOLID_LINE = "solid_line"
DASHED_LINE = "dashed_line"
STOP_SIGN = "stop_sign"
ORIENTATION = "orientation"
MIN_SPEED = "min_speed"
MAX_SPEED = "max_speed"

ROAD_ORDER = (COLLISION, SOLID_LINE, DASHED_LINE, ORIENTATION, MIN_SPEED, MAX_SPEED)
INTERSECTION_ORDER = (
    COLLISION,
    SOLID_LINE,
    DASHED_LINE,
    STOP_SIGN,
    ORIENTATION,
    MIN_SPEED,
    MAX_SPEED,
)

DEFAULT_SCALES = {
    COLLISION: 2.0,
    SOLID_LINE: 1.0,
    DASHED_LINE: 1.0,
    ORIENTATION: 0.1,
    MIN_SPEED: 2.0,
    MAX_SPEED: 2.0,
    STOP_SIGN: 1.0,
}


@dataclass(frozen=True)
class RuleParams:
    horizon: int = 10
    theta_tol: float = 0.1
    v_min: float = 2.0
    v_max: float = 15.0
    v_stop: float = 0.5
    stop_duration: float = 1.0
    # margin reported by the collision rule when the scene has no other agents
    clear_margin: float = 100.0
    scales: dict = field(default_factory=lambda: dict(DEFAULT_SCALES))
    a: float = DEFAULT_A
    c: float = DEFAULT_C

    def scale(self, name: str) -> float:
        return float(self.scales.get(name, DEFAULT_SCALES[name]))

    @classmethod
    def from_dict(cls, d: dict | None) -> RuleParams:
        d = dict(d or {})
        scales = dict(DEFAULT_SCALES)
        scales.update(d.pop("scales", {}))
        return cls(scales=scales, **d)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "theta_tol": self.theta_tol,
            "v_min": self.v_min,
            "v_max": self.v_max,
            "v_stop": self.v_stop,
            "stop_duration": self.stop_duration,
            "clear_margin": self.clear_margin,
            "scales": dict(self.scales),
            "a": self.a,
            "c": self.c,
        }


@dataclass
class StopMonitor:
    """Latched record of a completed stop, owned by the simulation loop."""

    completed: bool = False
    completed_at: int | None = None

    def update(self, speeds, positions, zones, v_stop: float, steps_needed: int, cycle: int) -> bool:
        """Latch once the last ``steps_needed + 1`` executed states are stopped in a zone."""
        if self.completed:
            return True
        k = steps_needed + 1
        if len(speeds) < k:
            return False
        v = np.asarray(speeds[-k:])
        p = np.asarray(positions[-k:])
        inside = np.zeros(k, dtype=bool)
        for z in zones:
            inside |= world.zone_margin(p[:, 0], p[:, 1], z) >= 0.0
        if np.all(inside) and np.all(v <= v_stop):
            self.completed = True
            self.completed_at = cycle
        return self.completed


# -- predicates -----------------------------------------------------------------


def _is_float_batch(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype != object


def _separation(sig, track, rotate: bool):
    """Per-axis keep-out separations of the ego against ``track`` over time."""
    n = sig.length
    cx, cy, heading = track.states[:n, 0], track.states[:n, 1], track.states[:n, 2]
    hx, hy = track.half_extents
    if _is_float_batch(sig.px):
        shape = sig.px.shape
        px = sig.px.reshape(n, -1)
        py = sig.py.reshape(n, -1)
        if not rotate:
            heading = np.zeros(n)
        sx, sy = kernels.box_separation(px, py, cx, cy, heading, hx, hy)
        return sx.reshape(shape), sy.reshape(shape)
    sx = np.empty(sig.px.shape, dtype=object)
    sy = np.empty(sig.px.shape, dtype=object)
    for t in range(n):
        dx, dy = world.body_frame(sig.px[t], sig.py[t], cx[t], cy[t], heading[t], rotate)
        sx[t] = abs(dx) - hx
        sy[t] = abs(dy) - hy
    return sx, sy


def _collision_formula(scene, params: RuleParams):
    if not scene.non_ego:
        return Predicate("clear", lambda sig, w: params.clear_margin)
    parts = []
    for j, track in enumerate(scene.non_ego):
        label = track.name or f"agent{j}"

        def sep_x(sig, w, j=j):
            return _separation(sig, w.non_ego[j], w.keepout_rotates)[0]

        def sep_y(sig, w, j=j):
            return _separation(sig, w.non_ego[j], w.keepout_rotates)[1]

        parts.append(Or((Predicate(f"{label}.dx", sep_x), Predicate(f"{label}.dy", sep_y))))
    return And(parts) if len(parts) > 1 else parts[0]


def _line_formula(scene, kind: str, horizon: int):
    lines = scene.map.lines_of_kind(kind)
    if not lines:
        raise ValueError(f"missing lane geometry: no {kind} lane line")

    def offset(sig, w):
        return world.offset_to_nearest_line(sig.px, sig.py, w.map.lines_of_kind(kind))

    return Always(Predicate(f"{kind}_offset", offset), 0, horizon)


def _wrap(d):
    return d - 2.0 * math.pi * np.round(np.asarray(ad.value(d), dtype=float) / (2.0 * math.pi))


def _orientation_formula(scene, params: RuleParams):
    if not scene.map.lanes:
        raise ValueError("missing lane geometry: map has no lanes")

    def aligned(sig, w):
        heading = world.lane_heading(sig.px, sig.py, w.map.lanes)
        err = _wrap(sig.psi - heading)
        return params.theta_tol - np.abs(err)

    t = params.horizon
    return Always(Predicate("heading_error", aligned), t, t)


def _stop_formula(scene, params: RuleParams, monitor: StopMonitor | None):
    if monitor is not None and monitor.completed:
        return Predicate("stop_done", lambda sig, w: 1.0)
    zones = scene.map.stop_zones
    if not zones:
        raise ValueError("missing lane geometry: no stop zone")
    k = steps_for(params.stop_duration, scene.dt)
    if k > params.horizon:
        raise ValueError("stop duration exceeds the planning horizon")

    def in_zone(sig, w):
        margins = [world.zone_margin(sig.px, sig.py, z) for z in w.map.stop_zones]
        return margins[0] if len(margins) == 1 else np.maximum.reduce(margins)

    stopped = Predicate("stopped", lambda sig, w: params.v_stop - sig.v)
    hold = Always(And((Predicate("in_stop_zone", in_zone), stopped)), 0, k)
    return Eventually(hold, 0, params.horizon - k)


def build_road_hierarchy(scene, params: RuleParams = RuleParams()) -> RuleHierarchy:
    h = params.horizon
    formulas = {
        COLLISION: Always(_collision_formula(scene, params), 0, h),
        SOLID_LINE: _line_formula(scene, world.SOLID, h),
        DASHED_LINE: _line_formula(scene, world.DASHED, h),
        ORIENTATION: _orientation_formula(scene, params),
        MIN_SPEED: Always(Predicate("speed_above_min", lambda sig, w: sig.v - params.v_min), 0, h),
        MAX_SPEED: Always(Predicate("speed_below_max", lambda sig, w: params.v_max - sig.v), 0, h),
    }
    rules = [Rule(n, formulas[n], params.scale(n)) for n in ROAD_ORDER]
    return RuleHierarchy(rules, params.a, params.c)


def build_intersection_hierarchy(
    scene, params: RuleParams = RuleParams(), stop_monitor: StopMonitor | None = None
) -> RuleHierarchy:
    road = build_road_hierarchy(scene, params)
    by_name = {r.name: r for r in road.rules}
    by_name[STOP_SIGN] = Rule(STOP_SIGN, _stop_formula(scene, params, stop_monitor), params.scale(STOP_SIGN))
    return RuleHierarchy([by_name[n] for n in INTERSECTION_ORDER], params.a, params.c)


BUILDERS = {
    "road": lambda scene, params, monitor=None: build_road_hierarchy(scene, params),
    "intersection": build_intersection_hierarchy,
}
