"""Transparency-policy synthesis on the fitted model.

The underlying decision problem treats the joint trust-workload state as
observable, transparency as the single controllable action dimension, and
the (reliability, traffic, pedestrians) context as an uncontrollable action
that is observed now and drawn from a fixed distribution in the future.
Value iteration yields Q(state, transparency, context); acting on a belief
takes the belief-weighted argmax (the standard certainty-equivalent upper
bound on the partially observable optimum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categories import (
    CONTEXTS,
    N_CONTEXTS,
    N_JOINT_STATES,
    N_TRANSPARENCY,
    TRANSPARENCY_LEVELS,
    Context,
    context_index,
    full_action,
    reliability_index,
)
from .errors import HorizonTooLarge, NonConvergence
from .model import RewardSpec, TrustWorkloadModel

VALUE_ITERATION_CAP = 1_000_000
MAX_EXACT_HORIZON = 6


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Discounting and context assumptions for policy synthesis.

    The default discount weights a reward one second ahead (25 frames) by
    roughly 1/e; future contexts default to equiprobable.
    """

    gamma: float = 25.0 / 26.0
    vi_tol: float = 1e-10
    uncontrollable_dist: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not self.vi_tol > 0:
            raise ValueError("vi_tol must be positive")
        dist = self.uncontrollable_dist
        if dist is None:
            dist = np.full(N_CONTEXTS, 1.0 / N_CONTEXTS)
        dist = np.asarray(dist, dtype=np.float64)
        if dist.shape != (N_CONTEXTS,):
            raise ValueError(f"uncontrollable_dist must have {N_CONTEXTS} "
                             "entries in canonical context order")
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError("uncontrollable_dist must be a distribution")
        dist.setflags(write=False)
        object.__setattr__(self, "uncontrollable_dist", dist)


@dataclass(frozen=True, eq=False)
class QmdpPolicy:
    """Q-values per (joint state, transparency, context), plus provenance."""

    q: np.ndarray
    reward: RewardSpec
    config: SolverConfig
    residual_trajectory: tuple = ()

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.shape != (N_JOINT_STATES, N_TRANSPARENCY, N_CONTEXTS):
            raise ValueError(
                f"q must have shape ({N_JOINT_STATES}, {N_TRANSPARENCY}, "
                f"{N_CONTEXTS}), got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("q contains non-finite entries")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


def _reward_per_state_context(reward: RewardSpec) -> np.ndarray:
    """(joint state, context) immediate reward table."""
    r = np.empty((N_JOINT_STATES, N_CONTEXTS))
    for u, ctx in enumerate(CONTEXTS):
        r[:, u] = reward.per_state_vector(reliability_index(ctx.reliability))
    return r


def _transition_tensor(model: TrustWorkloadModel) -> np.ndarray:
    """(state, transparency, context, next state) joint transitions."""
    t = np.empty((N_JOINT_STATES, N_TRANSPARENCY, N_CONTEXTS, N_JOINT_STATES))
    for k, transparency in enumerate(TRANSPARENCY_LEVELS):
        for u, ctx in enumerate(CONTEXTS):
            t[:, k, u, :] = model.transition_matrix(full_action(transparency, ctx))
    return t


def _q_sweep(q: np.ndarray, rewards: np.ndarray, trans: np.ndarray,
             p_ctx: np.ndarray, gamma: float) -> np.ndarray:
    # W(s') = E_{u'}[ max_a Q(s', a, u') ]
    w = q.max(axis=1) @ p_ctx
    return rewards[:, None, :] + gamma * np.einsum("akus,s->aku", trans, w)


def value_iteration(model: TrustWorkloadModel, reward: RewardSpec,
                    config: SolverConfig) -> QmdpPolicy:
    """Fixed point of the expected-context Q recursion.

    Iterates to sup-norm residual below ``config.vi_tol``; the residual
    sequence is retained on the policy for diagnostics.
    """
    rewards = _reward_per_state_context(reward)
    trans = _transition_tensor(model)
    p_ctx = config.uncontrollable_dist
    q = np.zeros((N_JOINT_STATES, N_TRANSPARENCY, N_CONTEXTS))
    residuals = []
    for _ in range(VALUE_ITERATION_CAP):
        q_next = _q_sweep(q, rewards, trans, p_ctx, config.gamma)
        residual = float(np.abs(q_next - q).max())
        residuals.append(residual)
        q = q_next
        if residual < config.vi_tol:
            return QmdpPolicy(q=q, reward=reward, config=config,
                              residual_trajectory=tuple(residuals))
    raise NonConvergence(
        f"value iteration did not reach {config.vi_tol} within "
        f"{VALUE_ITERATION_CAP} sweeps")


def finite_horizon_q(model: TrustWorkloadModel, reward: RewardSpec,
                     config: SolverConfig, horizon: int) -> np.ndarray:
    """Q after exactly ``horizon`` recursion steps from zero."""
    rewards = _reward_per_state_context(reward)
    trans = _transition_tensor(model)
    q = np.zeros((N_JOINT_STATES, N_TRANSPARENCY, N_CONTEXTS))
    for _ in range(horizon):
        q = _q_sweep(q, rewards, trans, config.uncontrollable_dist,
                     config.gamma)
    return q


def qmdp_action(policy: QmdpPolicy, b: np.ndarray, u: Context) -> str:
    """Belief-weighted greedy transparency; exact ties fall to AR_off."""
    scores = np.asarray(b, dtype=np.float64) @ policy.q[:, :, context_index(u)]
    return TRANSPARENCY_LEVELS[int(np.argmax(scores))]


def qmdp_belief_value(policy: QmdpPolicy, b: np.ndarray,
                      q: np.ndarray | None = None) -> float:
    """Context-expected value of acting greedily on the belief."""
    q = policy.q if q is None else q
    scores = np.asarray(b, dtype=np.float64) @ q.reshape(N_JOINT_STATES, -1)
    scores = scores.reshape(N_TRANSPARENCY, N_CONTEXTS)
    return float(scores.max(axis=0) @ policy.config.uncontrollable_dist)


@dataclass(frozen=True)
class PolicyGrid:
    """Chosen transparency over the (P(T_high), P(W_high)) unit square."""

    resolution: int
    p_trust_high: np.ndarray
    p_workload_high: np.ndarray
    actions: dict  # context -> (resolution, resolution) int array

    def rows(self):
        """Yield (context, p_trust_high, p_workload_high, action) records."""
        for ctx in CONTEXTS:
            grid = self.actions[ctx]
            for i, x in enumerate(self.p_trust_high):
                for j, y in enumerate(self.p_workload_high):
                    yield ctx, float(x), float(y), \
                        TRANSPARENCY_LEVELS[int(grid[i, j])]


def product_belief(p_trust_high: float, p_workload_high: float) -> np.ndarray:
    x, y = float(p_trust_high), float(p_workload_high)
    return np.array([(1 - x) * (1 - y), (1 - x) * y, x * (1 - y), x * y])


def policy_grid(policy: QmdpPolicy, resolution: int) -> PolicyGrid:
    """Evaluate the greedy action on product-form beliefs per context."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    ticks = np.linspace(0.0, 1.0, resolution)
    actions = {}
    for u, ctx in enumerate(CONTEXTS):
        q_u = policy.q[:, :, u]
        grid = np.empty((resolution, resolution), dtype=np.int64)
        for i, x in enumerate(ticks):
            for j, y in enumerate(ticks):
                scores = product_belief(x, y) @ q_u
                grid[i, j] = int(np.argmax(scores))
        actions[ctx] = grid
    return PolicyGrid(resolution=resolution, p_trust_high=ticks,
                      p_workload_high=ticks, actions=actions)


def exact_finite_horizon_value(model: TrustWorkloadModel, reward: RewardSpec,
                               config: SolverConfig, b: np.ndarray,
                               horizon: int) -> float:
    """Optimal expected discounted reward by exhaustive tree expansion.

    At every step the agent observes the current context (drawn from
    ``config.uncontrollable_dist``), picks a transparency, collects the
    belief-expected reward, then updates the belief on the sampled
    observation.  Feasible only for desk-scale horizons; serves as the
    testing oracle that belief-weighted Q-values must upper-bound.
    """
    if horizon > MAX_EXACT_HORIZON:
        raise HorizonTooLarge(
            f"exact expansion supports horizon <= {MAX_EXACT_HORIZON}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rewards = _reward_per_state_context(reward)
    p_ctx = config.uncontrollable_dist
    support = np.nonzero(p_ctx)[0]
    emis = model.joint_emission_table.reshape(N_JOINT_STATES, -1)  # (s, obs)
    trans = _transition_tensor(model)

    def value(beliefs: np.ndarray, h: int) -> np.ndarray:
        if h == 0:
            return np.zeros(len(beliefs))
        best_per_context = np.empty((len(beliefs), len(support)))
        for ui, u in enumerate(support):
            immediate = beliefs @ rewards[:, u]
            action_values = np.full((len(beliefs), N_TRANSPARENCY), -np.inf)
            for k in range(N_TRANSPARENCY):
                predicted = beliefs @ trans[:, k, u, :]
                joint = predicted[:, :, None] * emis[None, :, :]
                p_obs = joint.sum(axis=1)                  # (n, obs)
                children = joint.transpose(0, 2, 1)        # (n, obs, state)
                safe = np.where(p_obs[:, :, None] > 0.0,
                                children / np.maximum(p_obs[:, :, None], 1e-300),
                                0.25)
                flat = safe.reshape(-1, N_JOINT_STATES)
                child_values = value(flat, h - 1).reshape(p_obs.shape)
                action_values[:, k] = (p_obs * child_values).sum(axis=1)
            best_per_context[:, ui] = immediate + config.gamma * \
                action_values.max(axis=1)
        return best_per_context @ p_ctx[support]

    b = np.asarray(b, dtype=np.float64).reshape(1, N_JOINT_STATES)
    return float(value(b, horizon)[0])
