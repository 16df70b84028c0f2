"""Signal temporal logic formulas and their robustness.

Formulas are evaluated on whole signals: every node maps a trajectory to an
array whose leading axis is time (length shrinks through temporal operators)
and whose trailing axes, if any, index batched trajectories.  The same code
serves three value types:

* float arrays of shape (L,)      -- a single trajectory
* float arrays of shape (L, B)    -- B trajectories at once (tree search)
* object arrays of ``DiffScalar`` -- differentiable evaluation

Hard semantics use exact min/max.  Smooth semantics replace them by
log-sum-exp with a temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import autodiff as ad
from . import kernels

__all__ = [
    "Signals",
    "Formula",
    "Predicate",
    "Not",
    "And",
    "Or",
    "Always",
    "Eventually",
    "signals_of",
    "robustness_hard",
    "robustness_smooth",
    "evaluate",
    "HorizonError",
]


class HorizonError(ValueError):
    pass


class Signals(NamedTuple):
    """Ego state signals, each indexed by time first."""

    px: np.ndarray
    py: np.ndarray
    psi: np.ndarray
    v: np.ndarray

    @property
    def length(self) -> int:
        return self.px.shape[0]


def signals_of(traj) -> Signals:
    """Build signals from a Trajectory, a (L, 4) array or a batch (B, L, 4)."""
    states = getattr(traj, "states", traj)
    states = np.asarray(states)
    if states.ndim == 2:
        return Signals(states[:, 0], states[:, 1], states[:, 2], states[:, 3])
    if states.ndim == 3:
        s = np.ascontiguousarray(states.transpose(1, 2, 0))  # (L, 4, B)
        return Signals(s[:, 0], s[:, 1], s[:, 2], s[:, 3])
    raise ValueError(f"cannot build signals from array of shape {states.shape}")


# -- reductions ---------------------------------------------------------------


def _reduce(stack: np.ndarray, take_max: bool, temperature: float | None):
    """Reduce over axis 0 of ``stack``."""
    if stack.shape[0] == 1:
        return stack[0]
    if temperature is None:
        return stack.max(axis=0) if take_max else stack.min(axis=0)
    rest = stack.shape[1:]
    flat = stack.reshape(stack.shape[0], -1)
    if stack.dtype == object:
        fn = ad.smooth_max if take_max else ad.smooth_min
        out = np.empty(flat.shape[1], dtype=object)
        for j in range(flat.shape[1]):
            out[j] = fn(flat[:, j], temperature)
        return out.reshape(rest)
    return kernels.smooth_reduce(flat, temperature, take_max).reshape(rest)


def _stack(signals: list[np.ndarray]) -> np.ndarray:
    n = min(s.shape[0] for s in signals)
    if any(s.dtype == object for s in signals):
        out = np.empty((len(signals), n) + signals[0].shape[1:], dtype=object)
        for i, s in enumerate(signals):
            out[i] = s[:n]
        return out
    return np.stack([s[:n] for s in signals])


# -- formulas -----------------------------------------------------------------


class Formula:
    def signal(self, sig: Signals, scene, temperature: float | None) -> np.ndarray:
        raise NotImplementedError

    def fan_in_bound(self) -> float:
        """Worst-case sum of log(fan-in) over reductions along any root-leaf path."""
        raise NotImplementedError

    def depth(self) -> int:
        raise NotImplementedError

    # convenience combinators
    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True, eq=False)
class Predicate(Formula):
    """Atomic margin.  ``fn(signals, scene)`` returns one margin per time step."""

    name: str
    fn: Callable

    def signal(self, sig, scene, temperature):
        out = self.fn(sig, scene)
        if np.ndim(out) == 0:
            out = np.full(sig.px.shape, out, dtype=object if sig.px.dtype == object else float)
        if out.shape[0] != sig.length:
            raise ValueError(f"predicate {self.name!r} returned {out.shape[0]} steps, expected {sig.length}")
        return out

    def fan_in_bound(self):
        return 0.0

    def depth(self):
        return 0

    def __repr__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class Not(Formula):
    child: Formula

    def signal(self, sig, scene, temperature):
        return -self.child.signal(sig, scene, temperature)

    def fan_in_bound(self):
        return self.child.fan_in_bound()

    def depth(self):
        return 1 + self.child.depth()

    def __repr__(self):
        return f"~{self.child!r}"


@dataclass(frozen=True, eq=False)
class _Nary(Formula):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError(f"{type(self).__name__} needs at least one operand")

    _take_max = False

    def signal(self, sig, scene, temperature):
        parts = [c.signal(sig, scene, temperature) for c in self.children]
        return _reduce(_stack(parts), self._take_max, temperature)

    def fan_in_bound(self):
        inner = max(c.fan_in_bound() for c in self.children)
        return inner + math.log(len(self.children))

    def depth(self):
        return 1 + max(c.depth() for c in self.children)


class And(_Nary):
    _take_max = False

    def __repr__(self):
        return "(" + " & ".join(map(repr, self.children)) + ")"


class Or(_Nary):
    _take_max = True

    def __repr__(self):
        return "(" + " | ".join(map(repr, self.children)) + ")"


@dataclass(frozen=True, eq=False)
class _Temporal(Formula):
    child: Formula
    lo: int
    hi: int

    _take_max = False

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi):
            raise ValueError(f"bad interval [{self.lo}, {self.hi}]")

    def signal(self, sig, scene, temperature):
        s = self.child.signal(sig, scene, temperature)
        n = s.shape[0] - self.hi
        if n <= 0:
            raise HorizonError("horizon too short for formula")
        windows = _stack([s[k : k + n] for k in range(self.lo, self.hi + 1)])
        return _reduce(windows, self._take_max, temperature)

    def fan_in_bound(self):
        return self.child.fan_in_bound() + math.log(self.hi - self.lo + 1)

    def depth(self):
        return 1 + self.child.depth()


class Always(_Temporal):
    _take_max = False

    def __repr__(self):
        return f"G[{self.lo},{self.hi}]{self.child!r}"


class Eventually(_Temporal):
    _take_max = True

    def __repr__(self):
        return f"F[{self.lo},{self.hi}]{self.child!r}"


def steps_for(seconds: float, dt: float) -> int:
    """Convert a duration to whole steps, rounding toward the larger window."""
    return int(math.ceil(seconds / dt - 1e-9))


# -- evaluation ---------------------------------------------------------------


def evaluate(phi: Formula, traj, scene, t: int = 0, temperature: float | None = None):
    """Robustness of ``phi`` at step ``t``; hard if ``temperature`` is None."""
    sig = traj if isinstance(traj, Signals) else signals_of(traj)
    s = phi.signal(sig, scene, temperature)
    if t >= s.shape[0]:
        raise HorizonError("horizon too short for formula")
    return s[t]


def robustness_hard(phi: Formula, traj, scene, t: int = 0):
    return evaluate(phi, traj, scene, t, None)


def robustness_smooth(phi: Formula, traj, scene, temperature: float = 0.05, t: int = 0):
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return evaluate(phi, traj, scene, t, temperature)
