"""Two-stage receding-horizon planner: primitive-tree search, then Adam refinement."""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import dynamics
from .dynamics import EgoState, VehicleParams
from .hierarchy import RuleHierarchy, rank, reward_hard

log = logging.getLogger(__name__)

DEFAULT_ACTIONS = tuple(
    itertools.product((-5.0, 5.0), (-math.pi / 8, 0.0, math.pi / 8))
)


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 10
    t_execute: int = 1
    segment: int = 2
    lr: float = 0.01
    iterations: int = 10
    temperature: float = 0.05
    actions: tuple = DEFAULT_ACTIONS
    vehicle: VehicleParams = VehicleParams()
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 1 <= self.t_execute <= self.horizon:
            raise ValueError("t_execute must lie in [1, horizon]")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.segment < 1:
            raise ValueError("segment must be at least one step")

    @classmethod
    def from_dict(cls, d: dict | None) -> PlannerConfig:
        d = dict(d or {})
        if "actions" in d:
            d["actions"] = tuple(tuple(map(float, a)) for a in d["actions"])
        if "vehicle" in d:
            d["vehicle"] = VehicleParams(**d["vehicle"])
        return cls(**d)

    def to_dict(self) -> dict:
        v = self.vehicle
        return {
            "horizon": self.horizon,
            "t_execute": self.t_execute,
            "segment": self.segment,
            "lr": self.lr,
            "iterations": self.iterations,
            "temperature": self.temperature,
            "actions": [list(a) for a in self.actions],
            "vehicle": {
                "lf": v.lf,
                "lr": v.lr,
                "alpha_max": v.alpha_max,
                "delta_max": v.delta_max,
                "clamp_v": v.clamp_v,
            },
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }


# -- stage 1 ----------------------------------------------------------------------


@dataclass
class PrimitiveTree:
    actions: np.ndarray  # (|M|, 2)
    segment: int
    controls: np.ndarray  # (branches, T, 2)
    states: np.ndarray  # (branches, T + 1, 4)

    @property
    def depth(self) -> int:
        return math.ceil(self.controls.shape[1] / self.segment)

    def __len__(self) -> int:
        return self.controls.shape[0]


def primitive_controls(actions, segment: int, horizon: int) -> np.ndarray:
    """All piecewise-constant sequences, first segment most significant."""
    acts = np.asarray(actions, dtype=float).reshape(-1, 2)
    if acts.shape[0] == 0:
        raise ValueError("empty action set")
    depth = math.ceil(horizon / segment)
    m = acts.shape[0]
    idx = np.array(list(itertools.product(range(m), repeat=depth)), dtype=int).reshape(-1, depth)
    seg_of_step = np.minimum(np.arange(horizon) // segment, depth - 1)
    return acts[idx[:, seg_of_step]]


def generate_primitive_tree(
    x0: EgoState, actions, segment: int, horizon: int, dt: float, vehicle: VehicleParams = VehicleParams()
) -> PrimitiveTree:
    acts = np.asarray(actions, dtype=float).reshape(-1, 2)
    controls = dynamics.clamp_controls(primitive_controls(acts, segment, horizon), vehicle).reshape(
        -1, horizon, 2
    )
    states = _tree_rollout(x0, acts, segment, horizon, dt, vehicle)
    return PrimitiveTree(acts, segment, controls, states)


def _tree_rollout(x0, acts, segment, horizon, dt, vehicle):
    """Expand the tree level by level so branches share their prefixes."""
    x0 = x0.as_array() if isinstance(x0, EgoState) else np.asarray(x0, dtype=float)
    m = acts.shape[0]
    paths = x0[None, None, :]
    t = 0
    while t < horizon:
        length = min(segment, horizon - t)
        n = paths.shape[0]
        starts = np.repeat(paths[:, -1], m, axis=0)
        seg_ctrl = np.repeat(np.tile(acts, (n, 1))[:, None, :], length, axis=1)
        seg = dynamics.rollout_many(starts, seg_ctrl, dt, vehicle)
        paths = np.concatenate([np.repeat(paths, m, axis=0), seg[:, 1:]], axis=1)
        t += length
    return paths


def stage1_scores(tree: PrimitiveTree, hierarchy: RuleHierarchy, scene, temperature: float) -> np.ndarray:
    """Smooth reward of every branch, evaluated in one batched pass."""
    return np.asarray(hierarchy.reward(tree.states, scene, temperature), dtype=float).reshape(-1)


def stage1_select(tree: PrimitiveTree, hierarchy: RuleHierarchy, scene, temperature: float = 0.05):
    """Index and controls of the branch with the largest smooth reward.

    Ties go to the lowest branch index.
    """
    if len(tree) == 0:
        raise ValueError("empty primitive tree")
    scores = stage1_scores(tree, hierarchy, scene, temperature)
    best = int(np.argmax(scores))
    return best, tree.controls[best].copy(), float(scores[best])


# -- stage 2 ----------------------------------------------------------------------


class Adam:
    def __init__(self, shape, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return updated ``params`` for a descent step along ``grad``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class RefineResult:
    controls: np.ndarray
    reward: float
    initial_reward: float
    best_iteration: int
    rewards: list = field(default_factory=list)
    aborted: bool = False


def smooth_objective(x0, hierarchy: RuleHierarchy, scene, config: PlannerConfig):
    """Smooth reward as a function of a lifted (T, 2) control array."""

    def objective(u):
        traj = dynamics.rollout(x0, u, scene.dt, config.vehicle)
        return hierarchy.reward(traj, scene, config.temperature)

    return objective


def stage2_refine(
    u_init: np.ndarray,
    x0: EgoState,
    hierarchy: RuleHierarchy | None,
    scene,
    config: PlannerConfig,
    objective=None,
) -> RefineResult:
    """Adam ascent on the smooth reward, returning the best iterate seen.

    ``objective`` maps a lifted control array to a DiffScalar reward; by default
    it is the hierarchy's smooth reward along the rolled-out trajectory.
    """
    u = dynamics.clamp_controls(u_init, config.vehicle).reshape(np.shape(u_init))
    if objective is None:
        objective = smooth_objective(x0, hierarchy, scene, config)
    opt = Adam(u.shape, config.lr, config.beta1, config.beta2, config.eps)
    best_u, best_r, best_k = u.copy(), -math.inf, 0
    initial = None
    rewards = []
    aborted = False
    for k in range(config.iterations + 1):
        lifted = ad.lift(u)
        r = objective(lifted)
        r_val = ad.value(r)
        rewards.append(float(r_val))
        if initial is None:
            initial = float(r_val)
        if r_val > best_r:
            best_u, best_r, best_k = u.copy(), float(r_val), k
        if k == config.iterations:
            _release(lifted)
            break
        grad = ad.gradient(r, size=u.size).reshape(u.shape)
        _release(lifted)
        if not np.all(np.isfinite(grad)):
            log.warning("non-finite gradient at iteration %d; refinement aborted", k)
            aborted = True
            break
        u = opt.step(u, -grad)
        u = dynamics.clamp_controls(u, config.vehicle).reshape(u.shape)
    return RefineResult(best_u, best_r, initial, best_k, rewards, aborted)


def _release(lifted):
    lifted.flat[0].tape.release()


# -- one planning cycle -------------------------------------------------------------


@dataclass
class CycleDiagnostics:
    stage1_time: float
    stage2_time: float
    total_time: float
    branch_index: int
    stage1_reward_batch: float
    stage1_reward: float
    refined_reward: float
    stage1_rank: int
    rank: int
    robustness_raw: list
    robustness: list
    reward_hard: float
    best_iteration: int
    tree_searches: int = 1
    refinements: int = 1
    aborted: bool = False
    warnings: list = field(default_factory=list)
    planned_states: np.ndarray | None = None
    planned_controls: np.ndarray | None = None


def plan_cycle(x: EgoState, scene, hierarchy: RuleHierarchy, config: PlannerConfig = PlannerConfig()):
    """Plan over the horizon and return the controls to execute plus diagnostics."""
    t0 = time.perf_counter()
    tree = generate_primitive_tree(x, config.actions, config.segment, config.horizon, scene.dt, config.vehicle)
    branch, u1, batch_reward = stage1_select(tree, hierarchy, scene, config.temperature)
    t1 = time.perf_counter()
    res = stage2_refine(u1, x, hierarchy, scene, config)
    t2 = time.perf_counter()

    traj1 = dynamics.rollout(x, u1, scene.dt, config.vehicle)
    traj = dynamics.rollout(x, res.controls, scene.dt, config.vehicle)
    rank1 = rank(hierarchy.robustness(traj1, scene))
    raw = hierarchy.robustness_raw(traj, scene)
    rho = hierarchy.robustness(traj, scene)
    r = rank(rho)
    warnings = []
    if r > rank1:
        msg = f"refinement worsened rank {rank1} -> {r}"
        log.warning(msg)
        warnings.append(msg)
    if res.aborted:
        warnings.append("refinement aborted on non-finite gradient")
    t3 = time.perf_counter()
    diag = CycleDiagnostics(
        stage1_time=t1 - t0,
        stage2_time=t2 - t1,
        total_time=t3 - t0,
        branch_index=branch,
        stage1_reward_batch=batch_reward,
        stage1_reward=res.initial_reward,
        refined_reward=res.reward,
        stage1_rank=rank1,
        rank=r,
        robustness_raw=[float(v) for v in raw],
        robustness=[float(v) for v in rho],
        reward_hard=reward_hard(rho, hierarchy.a),
        best_iteration=res.best_iteration,
        aborted=res.aborted,
        warnings=warnings,
        planned_states=traj.states,
        planned_controls=res.controls,
    )
    return res.controls[: config.t_execute].copy(), diag
