import math

import numpy as np
import pytest

from rulehier import world

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def straight_road(non_ego=()):
    """Three-lane straight road along +x; the ego lane is centred on y = 0."""
    m = world.MapModel(
        lane_lines=(
            world.LaneLine([(-100, -1.75), (600, -1.75)], world.SOLID),
            world.LaneLine([(600, 1.75), (-100, 1.75)], world.DASHED),
            world.LaneLine([(600, 5.25), (-100, 5.25)], world.SOLID),
        ),
        lanes=(world.Lane([(-100, 0.0), (600, 0.0)]), world.Lane([(-100, 3.5), (600, 3.5)])),
    )
    return world.WorldScene(m, tuple(non_ego), 0.2)


def stop_road():
    """Vertical road with a stop zone centred at (0, 21)."""
    m = world.MapModel(
        lane_lines=(
            world.LaneLine([(1.75, -100), (1.75, 200)], world.SOLID),
            world.LaneLine([(-1.75, 200), (-1.75, -100)], world.DASHED),
        ),
        lanes=(world.Lane([(0.0, -100), (0.0, 200)]),),
        stop_zones=(world.StopZone((0.0, 21.0), (1.75, 5.0)),),
    )
    return world.WorldScene(m, (), 0.2)


def parked(x, y, steps=11, heading=0.0, name="parked"):
    return world.track_from_script(x, y, heading, [0.0], 0.2, steps, name=name)


def constant_states(px, py, psi, v, steps=11, dt=0.2):
    """States (steps, 4) for straight uniform motion along the heading."""
    t = np.arange(steps) * dt
    return np.column_stack(
        [px + v * math.cos(psi) * t, py + v * math.sin(psi) * t, np.full(steps, psi), np.full(steps, v)]
    )


@pytest.fixture
def road():
    return straight_road()


@pytest.fixture(scope="session")
def scenario_runs():
    """Full closed-loop run of every shipped scenario, shared across modules."""
    from rulehier import sim

    return {name: sim.run_scenario(name) for name in sim.registered_scenarios()}
