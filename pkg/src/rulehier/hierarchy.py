"""Rule hierarchies, trajectory rank and rank-preserving rewards."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import stl

DEFAULT_A = 2.01
DEFAULT_C = 30.0


@dataclass(frozen=True)
class Rule:
    name: str
    formula: stl.Formula
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"rule {self.name!r}: scale must be positive")


@dataclass(frozen=True)
class RuleHierarchy:
    """Rules ordered from highest to lowest priority."""

    rules: tuple[Rule, ...]
    a: float = DEFAULT_A
    c: float = DEFAULT_C

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise ValueError("a hierarchy needs at least one rule")
        if self.a <= 2:
            raise ValueError("a must be greater than 2")
        if self.c <= 0:
            raise ValueError("c must be positive")

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    @property
    def scales(self) -> np.ndarray:
        return np.array([r.scale for r in self.rules])

    def robustness_raw(self, traj, scene, temperature: float | None = None):
        """Unscaled robustness of every rule: array (N,) or (N, B), float or object."""
        sig = traj if isinstance(traj, stl.Signals) else stl.signals_of(traj)
        vals = [stl.evaluate(r.formula, sig, scene, 0, temperature) for r in self.rules]
        if any(isinstance(v, ad.DiffScalar) for v in vals):
            out = np.empty(len(vals), dtype=object)
            out[:] = vals
            return out
        return np.array(vals, dtype=float)

    def robustness(self, traj, scene, temperature: float | None = None):
        return scale_robustness(self.robustness_raw(traj, scene, temperature), self.scales)

    def reward(self, traj, scene, temperature: float):
        """Smooth reward of a trajectory (float, batch array or DiffScalar)."""
        return reward_smooth(self.robustness(traj, scene, temperature), self.a, self.c)


def scale_robustness(rho_raw, scales):
    """``tanh(rho_raw / s)`` componentwise; rows of ``rho_raw`` are rules."""
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    rho_raw = np.asarray(rho_raw)
    s = scales.reshape((-1,) + (1,) * (rho_raw.ndim - 1))
    return ad.tanh(rho_raw / s)


def _step(rho):
    return (np.asarray(ad.value(rho), dtype=float) >= 0.0).astype(int)


def rank(rho) -> int | np.ndarray:
    """Rank in 1..2**N (1 = every rule satisfied).  Accepts (N,) or (N, B)."""
    steps = _step(rho)
    n = steps.shape[0]
    weights = 2 ** np.arange(n - 1, -1, -1)
    weights = weights.reshape((-1,) + (1,) * (steps.ndim - 1))
    r = 2**n - (weights * steps).sum(axis=0)
    return int(r) if np.ndim(r) == 0 else r


def satisfied(rho) -> np.ndarray:
    return _step(rho).astype(bool)


def _priority_weights(n: int, a: float) -> np.ndarray:
    return a ** np.arange(n, 0, -1, dtype=float)  # a^N ... a^1


def reward_hard(rho, a: float = DEFAULT_A) -> float | np.ndarray:
    """Step-function rank-preserving reward.  Requires a > 2 and |rho_i| <= a/2."""
    if a <= 2:
        raise ValueError("reward_hard requires a > 2")
    r = np.asarray(ad.value(rho), dtype=float)
    if np.any(np.abs(r) > a / 2):
        raise ValueError("robustness outside [-a/2, a/2]")
    n = r.shape[0]
    w = _priority_weights(n, a).reshape((-1,) + (1,) * (r.ndim - 1))
    out = (w * _step(r)).sum(axis=0) + r.sum(axis=0) / n
    return float(out) if np.ndim(out) == 0 else out


def reward_smooth(rho, a: float = DEFAULT_A, c: float = DEFAULT_C):
    """Sigmoid-smoothed reward; differentiable in ``rho``."""
    if a <= 2:
        raise ValueError("reward_smooth requires a > 2")
    if c <= 0:
        raise ValueError("reward_smooth requires c > 0")
    rho = np.asarray(rho) if not isinstance(rho, np.ndarray) else rho
    n = rho.shape[0]
    w = _priority_weights(n, a)
    if rho.dtype == object:
        total = 0.0
        for i in range(n):
            total = total + w[i] * ad.sigmoid(c * rho[i]) + rho[i] / n
        return total
    r = rho.astype(float)
    wb = w.reshape((-1,) + (1,) * (r.ndim - 1))
    out = (wb * ad.sigmoid(c * r)).sum(axis=0) + r.sum(axis=0) / n
    return float(out) if np.ndim(out) == 0 else out
