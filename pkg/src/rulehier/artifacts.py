"""Data artifacts: reward-surface grid, SVG frames, and the gradient check."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import autodiff as ad
from . import dynamics, world
from .hierarchy import DEFAULT_A, DEFAULT_C, reward_smooth


# -- reward surface -----------------------------------------------------------------


def reward_surface(a: float = DEFAULT_A, c: float = DEFAULT_C, res: int = 101):
    """Smooth reward of a 2-rule hierarchy over rho_1, rho_2 in [-1, 1].

    Returns ``(axis, grid)`` with ``grid[i, j] = R(axis[i], axis[j])``.
    """
    if res < 2:
        raise ValueError("resolution must be at least 2")
    axis = np.linspace(-1.0, 1.0, res)
    r1, r2 = np.meshgrid(axis, axis, indexing="ij")
    grid = reward_smooth(np.stack([r1.ravel(), r2.ravel()]), a, c).reshape(res, res)
    return axis, grid


def quadrant_means(axis, grid) -> dict:
    """Mean reward per sign quadrant, keyed ``"--"``, ``"-+"``, ``"+-"``, ``"++"``.

    Grid points on an axis (rho = 0) belong to no quadrant.
    """
    neg, pos = axis < 0, axis > 0
    out = {}
    for k1, m1 in (("-", neg), ("+", pos)):
        for k2, m2 in (("-", neg), ("+", pos)):
            out[k1 + k2] = float(grid[np.ix_(m1, m2)].mean())
    return out


def emit_reward_surface(path, a: float = DEFAULT_A, c: float = DEFAULT_C, res: int = 101) -> Path:
    """Write the surface as long-format CSV with columns rho1, rho2, reward."""
    axis, grid = reward_surface(a, c, res)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rho1", "rho2", "reward"])
        for i, x in enumerate(axis):
            for j, y in enumerate(axis):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(grid[i, j]))])
    return path


# -- SVG frames -----------------------------------------------------------------------

PX_PER_M = 8.0
PAD_M = 10.0


class _Canvas:
    def __init__(self, xmin, xmax, ymin, ymax):
        self.xmin, self.ymax = xmin, ymax
        self.width = (xmax - xmin) * PX_PER_M
        self.height = (ymax - ymin) * PX_PER_M
        self.items = []

    def xy(self, x, y):
        # world y points up, SVG y points down
        return (x - self.xmin) * PX_PER_M, (self.ymax - y) * PX_PER_M

    def polyline(self, pts, **style):
        coords = " ".join("%.2f,%.2f" % self.xy(x, y) for x, y in pts)
        self.items.append(f'<polyline points="{coords}" fill="none"{_attrs(style)}/>')

    def polygon(self, pts, **style):
        coords = " ".join("%.2f,%.2f" % self.xy(x, y) for x, y in pts)
        self.items.append(f'<polygon points="{coords}"{_attrs(style)}/>')

    def circle(self, x, y, r, **style):
        cx, cy = self.xy(x, y)
        self.items.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r * PX_PER_M:.2f}"{_attrs(style)}/>')

    def text(self, x, y, s):
        self.items.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="12" font-family="monospace">{escape(s)}</text>')

    def svg(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width:.0f}" '
            f'height="{self.height:.0f}" viewBox="0 0 {self.width:.2f} {self.height:.2f}">'
        )
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _attrs(style: dict) -> str:
    return "".join(f' {k.replace("_", "-")}="{v}"' for k, v in style.items())


def _box(cx, cy, heading, hx, hy):
    c, s = math.cos(heading), math.sin(heading)
    return [(cx + c * dx - s * dy, cy + s * dx + c * dy) for dx, dy in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))]


def _view(result, cycles):
    pts = [(s.px, s.py) for s in result.executed]
    for k in cycles:
        pts.extend(map(tuple, np.asarray(result.trace[k].planned)[:, :2]))
    for tr in result.scenario.scene.non_ego:
        pts.extend(map(tuple, tr.states[: len(result.executed), :2]))
    p = np.array(pts)
    return p[:, 0].min() - PAD_M, p[:, 0].max() + PAD_M, p[:, 1].min() - PAD_M, p[:, 1].max() + PAD_M


def ego_pixel(canvas_bounds, px, py):
    """Pixel position of a world point for a frame drawn with ``canvas_bounds``."""
    return _Canvas(*canvas_bounds).xy(px, py)


def render_frame(result, k: int, bounds=None) -> str:
    """SVG of cycle ``k``: map, non-ego boxes, ego pose, planned and executed paths."""
    sc = result.scenario
    scene = sc.scene
    bounds = bounds or _view(result, [k])
    cv = _Canvas(*bounds)
    for lane in sc.decor.get("crossing_lanes", []):
        cv.polyline(lane, stroke="#dddddd", stroke_width=28)
    for lane in scene.map.lanes:
        cv.polyline(lane.center, stroke="#eeeeee", stroke_width=28)
    for line in scene.map.lane_lines:
        dash = {} if line.kind == world.SOLID else {"stroke_dasharray": "12,8"}
        cv.polyline(line.points, stroke="#444444", stroke_width=2, **dash)
    for z in scene.map.stop_zones:
        (cx, cy), (hx, hy) = z.center, z.half_extents
        cv.polygon(_box(cx, cy, 0.0, hx, hy), fill="#ff000033", stroke="#cc0000")
    for tr in scene.non_ego:
        s = tr.states[min(k, len(tr.states) - 1)]
        cv.polygon(_box(s[0], s[1], s[2], *tr.half_extents), fill="#3366cc55", stroke="#3366cc")
    executed = [(e.px, e.py) for e in result.executed[: k + 2]]
    cv.polyline(executed, stroke="#22aa22", stroke_width=2, id="executed")
    planned = np.asarray(result.trace[k].planned)[:, :2]
    cv.polyline(planned, stroke="#ee9900", stroke_width=2, stroke_dasharray="4,3", id="planned")
    x = result.trace[k].state
    cv.polygon(_box(x[0], x[1], x[2], 2.25, 0.9), fill="#22aa22", stroke="#116611", id="ego-body")
    cv.circle(x[0], x[1], 0.4, fill="black", id="ego")
    t = result.trace[k]
    cv.text(8, 16, f"{sc.name}  cycle {k}  rank {t.rank}  violated {','.join(t.violated) or '-'}")
    return cv.svg()


def emit_frames(result, out_dir, cycles=None) -> list[Path]:
    """Write one SVG per requested cycle (all cycles by default)."""
    if not result.trace:
        raise ValueError("empty trace")
    cycles = range(len(result.trace)) if cycles is None else list(cycles)
    bounds = _view(result, cycles)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create frame directory {out_dir}: {e}") from e
    paths = []
    for k in cycles:
        p = out_dir / f"{result.scenario.name}_{k:04d}.svg"
        try:
            p.write_text(render_frame(result, k, bounds))
        except OSError as e:
            raise OSError(f"cannot write frame {p}: {e}") from e
        paths.append(p)
    return paths


# -- gradient check -----------------------------------------------------------------


def finite_difference(f, u: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of a float array."""
    g = np.empty(u.size)
    flat = u.ravel()
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up.reshape(u.shape)) - f(dn.reshape(u.shape))) / (2.0 * h)
    return g.reshape(u.shape)


def gradient_check(trials: int = 50, seed: int = 0, scenario: str = "overtake-from-lane", h: float = 1e-5, rtol: float = 1e-4):
    """Compare the reverse-mode gradient of the smooth reward with central differences.

    Each trial draws a random ego state near the road and random controls
    strictly inside the actuator bounds (the clamp is not differentiable at
    its bounds).  A trial passes when ``max|g - fd| <= rtol * max|fd|``.
    Returns a list of per-trial dicts.
    """
    from . import sim

    sc = sim.get_scenario(scenario)
    cfg = sc.planner
    veh = cfg.vehicle
    rng = np.random.default_rng(seed)
    results = []
    for k in range(trials):
        start = int(rng.integers(0, sc.cycles))
        scene = sc.scene.window(start, cfg.horizon + 1)
        hier = sc.build_hierarchy(scene)
        x0 = dynamics.EgoState(
            rng.uniform(-5.0, 30.0), rng.uniform(-3.0, 4.5), rng.uniform(-0.3, 0.3), rng.uniform(2.0, 16.0)
        )
        u = np.column_stack(
            [
                rng.uniform(-0.9, 0.9, cfg.horizon) * veh.alpha_max,
                rng.uniform(-0.9, 0.9, cfg.horizon) * veh.delta_max,
            ]
        )

        def f(uu):
            return float(hier.reward(dynamics.rollout(x0, uu, scene.dt, veh), scene, cfg.temperature))

        lifted = ad.lift(u)
        r = hier.reward(dynamics.rollout(x0, lifted, scene.dt, veh), scene, cfg.temperature)
        g = ad.gradient(r, size=u.size).reshape(u.shape)
        lifted.flat[0].tape.release()
        fd = finite_difference(f, u, h)
        err = np.abs(g - fd)
        scale = float(np.abs(fd).max())
        # entries far below the largest one are dominated by difference noise,
        # so the pass test is normwise; componentwise error is reported for those above 1e-3 of the max
        big = np.abs(fd) > 1e-3 * scale
        rel_big = float((err[big] / np.abs(fd[big])).max()) if big.any() else 0.0
        normwise = float(err.max() / scale) if scale > 0 else float(err.max())
        results.append(
            {
                "trial": k,
                "normwise_rel_err": normwise,
                "componentwise_rel_err": rel_big,
                "max_abs_err": float(err.max()),
                "reward": float(ad.value(r)),
                "ok": bool(normwise <= rtol),
            }
        )
    return results
