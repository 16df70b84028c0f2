"""Scenario library and closed-loop simulation.

Scenario files are JSON (see ``docs/scenario_schema.md``).  A run produces
one :class:`CycleTrace` per planning cycle plus a summary with Table-style
timing statistics.
"""

from __future__ import annotations

import gc
import json
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, kernels, rulebank, world
from .dynamics import ControlInput, EgoState
from .planner import PlannerConfig, plan_cycle
from .rulebank import RuleParams, StopMonitor
from .stl import steps_for

TRACE_SCHEMA = 1


class UnknownScenario(KeyError):
    pass


@dataclass
class Scenario:
    name: str
    scene: world.WorldScene
    ego: EgoState
    hierarchy: str
    cycles: int
    expected_violations: frozenset
    rule_params: RuleParams
    planner: PlannerConfig
    description: str = ""
    decor: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def build_hierarchy(self, scene, monitor=None):
        return rulebank.BUILDERS[self.hierarchy](scene, self.rule_params, monitor)


def _map_from(d: dict) -> world.MapModel:
    return world.MapModel(
        lane_lines=tuple(world.LaneLine(l["points"], l.get("kind", world.SOLID)) for l in d.get("lane_lines", [])),
        lanes=tuple(world.Lane(l["center"], l.get("headings")) for l in d.get("lanes", [])),
        stop_zones=tuple(world.StopZone(tuple(z["center"]), tuple(z["half_extents"])) for z in d.get("stop_zones", [])),
    )


def scenario_from_dict(cfg: dict) -> Scenario:
    if cfg.get("schema", 1) != 1:
        raise ValueError(f"unsupported scenario schema {cfg.get('schema')}")
    if cfg["hierarchy"] not in rulebank.BUILDERS:
        raise ValueError(f"unknown hierarchy {cfg['hierarchy']!r}")
    dt = float(cfg.get("dt", 0.2))
    params = RuleParams.from_dict(cfg.get("rules"))
    pcfg = dict(cfg.get("planner") or {})
    pcfg.setdefault("horizon", params.horizon)
    planner = PlannerConfig.from_dict(pcfg)
    if planner.horizon != params.horizon:
        params = RuleParams.from_dict({**params.to_dict(), "horizon": planner.horizon})
    cycles = int(cfg.get("cycles", 40))
    steps = cycles + planner.horizon + 1
    tracks = []
    for ne in cfg.get("non_ego", []):
        tracks.append(
            world.track_from_script(
                ne["x"],
                ne["y"],
                ne.get("heading", 0.0),
                ne.get("speeds", [0.0]),
                dt,
                steps,
                half_extents=tuple(ne.get("half_extents", (5.0, 2.0))),
                name=ne.get("name", ""),
            )
        )
    scene = world.WorldScene(
        _map_from(cfg["map"]), tuple(tracks), dt, bool(cfg.get("keepout_rotates", True))
    )
    e = cfg["ego"]
    names = rulebank.ROAD_ORDER if cfg["hierarchy"] == "road" else rulebank.INTERSECTION_ORDER
    expected = frozenset(cfg.get("expected_violations", []))
    if not expected <= set(names):
        raise ValueError(f"expected violations {sorted(expected - set(names))} are not rules of this hierarchy")
    return Scenario(
        name=cfg["name"],
        scene=scene,
        ego=EgoState(e["px"], e["py"], e["psi"], e["v"]),
        hierarchy=cfg["hierarchy"],
        cycles=cycles,
        expected_violations=expected,
        rule_params=params,
        planner=planner,
        description=cfg.get("description", ""),
        decor={"crossing_lanes": [l["center"] for l in cfg["map"].get("crossing_lanes", [])]},
        config=cfg,
    )


def load_scenario(path) -> Scenario:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def registered_scenarios() -> list[str]:
    files = resources.files("rulehier").joinpath("scenarios").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def get_scenario(name: str) -> Scenario:
    if name.endswith(".json") and Path(name).exists():
        return load_scenario(name)
    names = registered_scenarios()
    if name not in names:
        raise UnknownScenario(f"unknown scenario {name!r}; registered: {', '.join(names)}")
    with resources.files("rulehier").joinpath("scenarios", f"{name}.json").open() as f:
        return scenario_from_dict(json.load(f))


@dataclass
class CycleTrace:
    cycle: int
    state: list
    controls: list
    robustness_raw: list
    robustness: list
    rank: int
    stage1_rank: int
    branch_index: int
    reward_stage1: float
    reward_refined: float
    reward_hard: float
    best_iteration: int
    stop_latched: bool
    violated: list
    planned: list
    stage1_time: float
    stage2_time: float
    cycle_time: float
    warnings: list = field(default_factory=list)

    def record(self, with_timing: bool = False) -> dict:
        """Trace record; wall-clock fields are left out unless requested."""
        d = {
            "cycle": self.cycle,
            "state": self.state,
            "controls": self.controls,
            "robustness_raw": self.robustness_raw,
            "robustness": self.robustness,
            "rank": self.rank,
            "stage1_rank": self.stage1_rank,
            "branch_index": self.branch_index,
            "reward_stage1": self.reward_stage1,
            "reward_refined": self.reward_refined,
            "reward_hard": self.reward_hard,
            "best_iteration": self.best_iteration,
            "stop_latched": self.stop_latched,
            "violated": self.violated,
            "planned": self.planned,
            "warnings": self.warnings,
        }
        if with_timing:
            d["timing"] = {
                "stage1": self.stage1_time,
                "stage2": self.stage2_time,
                "cycle": self.cycle_time,
            }
        return d


@dataclass
class RunResult:
    scenario: Scenario
    trace: list
    executed: list  # EgoState per step, including the initial state
    summary: dict


def timing_stats(times) -> dict:
    t = list(times)
    return {
        "mean": statistics.fmean(t),
        "std": statistics.pstdev(t) if len(t) > 1 else 0.0,
        "median": statistics.median(t),
        "max": max(t),
        "min": min(t),
    }


def run_scenario(name_or_scenario, cycles: int | None = None, seed: int = 0, initial_noise: float = 0.0) -> RunResult:
    """Closed-loop run: plan, execute the first ``t_execute`` controls, repeat.

    ``seed`` drives optional Gaussian noise on the ego's initial position and
    speed (``initial_noise`` standard deviation, default off).
    """
    sc = name_or_scenario if isinstance(name_or_scenario, Scenario) else get_scenario(name_or_scenario)
    cycles = sc.cycles if cycles is None else int(cycles)
    cfg = sc.planner
    dt = sc.scene.dt
    x = sc.ego
    if initial_noise > 0:
        rng = np.random.default_rng(seed)
        n = rng.normal(0.0, initial_noise, 3)
        x = EgoState(x.px + n[0], x.py + n[1], x.psi, max(0.0, x.v + n[2]))

    kernels.warmup()
    monitor = StopMonitor()
    stop_steps = steps_for(sc.rule_params.stop_duration, dt)
    # the scene must cover every cycle's horizon
    if any(len(tr) < cycles + cfg.horizon + 1 for tr in sc.scene.non_ego):
        sc.scene = world.WorldScene(
            sc.scene.map,
            tuple(world.extend_track(tr, cycles + cfg.horizon + 1, dt) for tr in sc.scene.non_ego),
            dt,
            sc.scene.keepout_rotates,
        )
    # one untimed cycle so lazy initialisation does not pollute the statistics
    warm_scene = sc.scene.window(0, cfg.horizon + 1)
    plan_cycle(x, warm_scene, sc.build_hierarchy(warm_scene, StopMonitor()), cfg)

    executed = [x]
    trace = []
    step_no = 0
    cycle = 0
    while cycle < cycles:
        scene = sc.scene.window(step_no, cfg.horizon + 1)
        hier = sc.build_hierarchy(scene, monitor)
        latched = monitor.completed
        u, diag = _timed_plan(x, scene, hier, cfg)
        for a, d in u:
            x = dynamics.step(x, ControlInput(float(a), float(d)), dt, cfg.vehicle)
            executed.append(x)
            step_no += 1
            if sc.scene.map.stop_zones:
                monitor.update(
                    [s.v for s in executed],
                    [(s.px, s.py) for s in executed],
                    sc.scene.map.stop_zones,
                    sc.rule_params.v_stop,
                    stop_steps,
                    cycle,
                )
        violated = [n for n, r in zip(hier.names, diag.robustness_raw) if r < 0.0]
        trace.append(
            CycleTrace(
                cycle=cycle,
                state=[executed[-1 - len(u)].px, executed[-1 - len(u)].py, executed[-1 - len(u)].psi, executed[-1 - len(u)].v],
                controls=[[float(a), float(d)] for a, d in u],
                robustness_raw=diag.robustness_raw,
                robustness=diag.robustness,
                rank=diag.rank,
                stage1_rank=diag.stage1_rank,
                branch_index=diag.branch_index,
                reward_stage1=diag.stage1_reward,
                reward_refined=diag.refined_reward,
                reward_hard=diag.reward_hard,
                best_iteration=diag.best_iteration,
                stop_latched=latched,
                violated=violated,
                planned=np.asarray(diag.planned_states, dtype=float).tolist(),
                stage1_time=diag.stage1_time,
                stage2_time=diag.stage2_time,
                cycle_time=diag.total_time,
                warnings=diag.warnings,
            )
        )
        cycle += 1

    ever = sorted({n for t in trace for n in t.violated}, key=lambda n: list(hier.names).index(n))
    summary = {
        "scenario": sc.name,
        "cycles": len(trace),
        "seed": seed,
        "kernel_backend": kernels.BACKEND,
        "timing": timing_stats(t.cycle_time for t in trace),
        "stage1_timing": timing_stats(t.stage1_time for t in trace),
        "stage2_timing": timing_stats(t.stage2_time for t in trace),
        "cycle_times": [t.cycle_time for t in trace],
        "violated": ever,
        "expected_violations": sorted(sc.expected_violations),
        "signature_ok": set(ever) <= set(sc.expected_violations),
        "rank_regressions": sum(1 for t in trace if t.rank > t.stage1_rank),
        "reward_regressions": sum(1 for t in trace if t.reward_refined < t.reward_stage1),
        "stop_latched_at": monitor.completed_at,
        "hierarchy": {"names": list(hier.names), "a": hier.a, "c": hier.c, "scales": list(map(float, hier.scales))},
        "rules": sc.rule_params.to_dict(),
        "planner": cfg.to_dict(),
        "final_state": [x.px, x.py, x.psi, x.v],
    }
    return RunResult(sc, trace, executed, summary)


def _timed_plan(x, scene, hier, cfg):
    # collect between cycles so a collector pause never lands inside a timed cycle
    gc.collect()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return plan_cycle(x, scene, hier, cfg)
    finally:
        if was_enabled:
            gc.enable()


def write_trace(result: RunResult, path, with_timing: bool = False) -> Path:
    """Write a JSON-lines trace: a header line, then one record per cycle."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    s = result.summary
    header = {
        "schema": TRACE_SCHEMA,
        "scenario": s["scenario"],
        "seed": s["seed"],
        "hierarchy": s["hierarchy"],
        "rules": s["rules"],
        "planner": s["planner"],
    }
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for t in result.trace:
            f.write(json.dumps(t.record(with_timing), sort_keys=True) + "\n")
    return path


def write_summary(result: RunResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(result.summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def format_timing_table(rows) -> str:
    """Rows of (scenario, stats dict) as a plain-text Mean±Std / Median / Max / Min table."""
    lines = [f"{'Scenario':<28} {'Mean±Std (s)':>16} {'Median (s)':>11} {'Max (s)':>9} {'Min (s)':>9}"]
    for name, st in rows:
        lines.append(
            f"{name:<28} {st['mean']:>8.3f}±{st['std']:<7.3f} {st['median']:>11.3f} {st['max']:>9.3f} {st['min']:>9.3f}"
        )
    return "\n".join(lines)


def executed_trajectory(result: RunResult) -> dynamics.Trajectory:
    states = np.array([s.as_array() for s in result.executed])
    controls = np.array([c for t in result.trace for c in t.controls])
    return dynamics.Trajectory(states, controls)
