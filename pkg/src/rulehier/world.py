"""Static map, non-ego tracks and the geometric queries rules are built from.

Geometry helpers are written against numpy so that they accept floats,
float arrays (batched branches) and object arrays of ``DiffScalar`` alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad

SOLID = "solid"
DASHED = "dashed"


def _polyline(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise ValueError("polyline needs at least 2 points")
    return pts


@dataclass(frozen=True)
class LaneLine:
    """A lane marking.  The lane it bounds lies to the left of its direction."""

    points: np.ndarray
    kind: str = SOLID

    def __post_init__(self):
        object.__setattr__(self, "points", _polyline(self.points))
        if self.kind not in (SOLID, DASHED):
            raise ValueError(f"unknown lane line kind {self.kind!r}")


@dataclass(frozen=True)
class Lane:
    center: np.ndarray
    headings: np.ndarray | None = None

    def __post_init__(self):
        c = _polyline(self.center)
        object.__setattr__(self, "center", c)
        if self.headings is None:
            d = np.diff(c, axis=0)
            h = np.arctan2(d[:, 1], d[:, 0])
            h = np.append(h, h[-1])
        else:
            h = np.asarray(self.headings, dtype=float)
            if h.shape != (c.shape[0],):
                raise ValueError("one heading per center point required")
        if np.any(h <= -math.pi) or np.any(h > math.pi):
            raise ValueError("lane headings must lie in (-pi, pi]")
        object.__setattr__(self, "headings", h)


@dataclass(frozen=True)
class StopZone:
    center: tuple[float, float]
    half_extents: tuple[float, float]

    def __post_init__(self):
        if min(self.half_extents) <= 0:
            raise ValueError("stop zone half-extents must be positive")


@dataclass(frozen=True)
class MapModel:
    lane_lines: tuple[LaneLine, ...] = ()
    lanes: tuple[Lane, ...] = ()
    stop_zones: tuple[StopZone, ...] = ()

    def lines_of_kind(self, kind: str) -> tuple[LaneLine, ...]:
        return tuple(line for line in self.lane_lines if line.kind == kind)


@dataclass(frozen=True)
class NonEgoTrack:
    """Rows of ``states`` are (px, py, heading, speed), one per time step."""

    states: np.ndarray
    half_extents: tuple[float, float] = (5.0, 2.0)
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "states", s)
        if min(self.half_extents) <= 0:
            raise ValueError("footprint half-extents must be positive")

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class WorldScene:
    map: MapModel
    non_ego: tuple[NonEgoTrack, ...] = ()
    dt: float = 0.2
    keepout_rotates: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def window(self, start: int, horizon_steps: int) -> WorldScene:
        """Scene whose tracks begin at absolute step ``start`` and cover the horizon."""
        tracks = []
        for tr in self.non_ego:
            ext = extend_track(tr, start + horizon_steps, self.dt)
            tracks.append(replace(ext, states=ext.states[start : start + horizon_steps]))
        return replace(self, non_ego=tuple(tracks))


def extend_track(track: NonEgoTrack, horizon_steps: int, dt: float = 0.2) -> NonEgoTrack:
    """Pad ``track`` to ``horizon_steps`` states by constant-velocity extrapolation."""
    n = len(track)
    if n == 0:
        raise ValueError("empty track")
    if n >= horizon_steps:
        return track
    last = track.states[-1]
    k = np.arange(1, horizon_steps - n + 1)
    extra = np.empty((k.size, 4))
    extra[:, 0] = last[0] + k * last[3] * math.cos(last[2]) * dt
    extra[:, 1] = last[1] + k * last[3] * math.sin(last[2]) * dt
    extra[:, 2] = last[2]
    extra[:, 3] = last[3]
    return replace(track, states=np.vstack([track.states, extra]))


def track_from_script(
    x0: float, y0: float, heading: float, speeds, dt: float, steps: int, **kw
) -> NonEgoTrack:
    """Integrate a straight-line track from a per-step speed schedule.

    ``speeds`` may be a number or a sequence; the last speed is held.
    """
    sched = np.atleast_1d(np.asarray(speeds, dtype=float))
    v = np.array([sched[min(i, sched.size - 1)] for i in range(steps)])
    dist = np.concatenate([[0.0], np.cumsum(v[:-1] * dt)])
    states = np.column_stack(
        [
            x0 + dist * math.cos(heading),
            y0 + dist * math.sin(heading),
            np.full(steps, heading),
            v,
        ]
    )
    return NonEgoTrack(states, **kw)


# -- geometry -----------------------------------------------------------------


def _select(cond, a, b):
    if isinstance(cond, np.ndarray):
        return np.where(cond, a, b)
    return a if cond else b


def _segment_offset(px, py, ax, ay, bx, by):
    """Signed offset to one segment and the unsigned distance used to rank segments."""
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    seg_len = math.sqrt(seg_len2)
    rx, ry = px - ax, py - ay
    cross = (dx * ry - dy * rx) / seg_len  # > 0 left of the direction
    along = (dx * rx + dy * ry) / seg_len2
    before = along < 0.0
    after = along > 1.0
    # outside the segment the distance is to the nearest endpoint
    ex = _select(after, px - bx, rx)
    ey = _select(after, py - by, ry)
    if isinstance(before, np.ndarray):
        outside = before | after
        if outside.any():
            end_d = np.sqrt(ex * ex + ey * ey)
            sgn = np.where(ad.value(cross) >= 0.0, 1.0, -1.0)
            signed = np.where(outside, sgn * end_d, cross)
        else:
            signed = cross
    elif before or after:
        end_d = ad.sqrt(ex * ex + ey * ey)
        signed = end_d if cross >= 0.0 else -end_d
    else:
        signed = cross
    dist = np.abs(ad.value(signed))
    return signed, dist


def signed_lateral_offset(point, polyline) -> float:
    """Signed distance from ``point`` to the nearest segment of ``polyline``.

    Positive to the left of the polyline direction.  ``point`` may be a pair of
    arrays (batched) or contain ``DiffScalar`` entries.
    """
    pts = polyline.points if isinstance(polyline, LaneLine) else _polyline(polyline)
    px, py = point
    return _nearest_offset(px, py, [pts])


def _nearest_offset(px, py, polylines):
    best = None
    best_d = None
    for pts in polylines:
        for i in range(pts.shape[0] - 1):
            ax, ay = pts[i]
            bx, by = pts[i + 1]
            if ax == bx and ay == by:
                continue
            off, d = _segment_offset(px, py, ax, ay, bx, by)
            if best is None:
                best, best_d = off, d
            else:
                closer = d < best_d
                best = _select(closer, off, best)
                best_d = np.where(closer, d, best_d)
    if best is None:
        raise ValueError("polyline has no non-degenerate segment")
    return best


def offset_to_nearest_line(px, py, lines) -> object:
    """Signed offset to the nearest of several lane lines."""
    if not lines:
        raise ValueError("no lane lines of the requested kind")
    return _nearest_offset(px, py, [ln.points for ln in lines])


def lane_heading(px, py, lanes) -> object:
    """Heading of the nearest lane-center segment (piecewise constant in position)."""
    if not lanes:
        raise ValueError("map has no lanes")
    px_v = np.asarray(ad.value(px), dtype=float)
    py_v = np.asarray(ad.value(py), dtype=float)
    best_d = np.full(px_v.shape, np.inf)
    best_h = np.zeros(px_v.shape)
    for lane in lanes:
        c = lane.center
        for i in range(c.shape[0] - 1):
            _, d = _segment_offset(px_v, py_v, *c[i], *c[i + 1])
            closer = d < best_d
            best_d = np.where(closer, d, best_d)
            best_h = np.where(closer, lane.headings[i], best_h)
    return best_h if best_h.ndim else float(best_h)


def body_frame(px, py, cx: float, cy: float, heading: float, rotate: bool = True):
    """Coordinates of (px, py) relative to a box at (cx, cy) with ``heading``."""
    rx, ry = px - cx, py - cy
    if not rotate:
        return rx, ry
    c, s = math.cos(heading), math.sin(heading)
    return c * rx + s * ry, -s * rx + c * ry


def occupancy_margin(ego_position, track: NonEgoTrack, t: int, rotate: bool = True):
    """l-infinity margin between a point and the keep-out box of ``track`` at step t.

    Positive outside the box, negative inside (penetration depth along the
    shallowest axis), zero on the boundary.
    """
    if not 0 <= t < len(track):
        raise IndexError(f"step {t} outside track of length {len(track)}")
    cx, cy, heading, _ = track.states[t]
    hx, hy = track.half_extents
    dx, dy = body_frame(ego_position[0], ego_position[1], cx, cy, heading, rotate)
    return np.maximum(np.abs(dx) - hx, np.abs(dy) - hy)


def zone_margin(px, py, zone: StopZone):
    """Inside margin of an axis-aligned zone: positive inside, negative outside."""
    (cx, cy), (hx, hy) = zone.center, zone.half_extents
    return np.minimum(hx - np.abs(px - cx), hy - np.abs(py - cy))
