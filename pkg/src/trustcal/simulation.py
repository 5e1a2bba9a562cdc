"""Open-loop step responses and closed-loop policy evaluation.

The closed-loop harness follows the live act-then-observe convention: the
belief starts at the priors, the policy picks a transparency from the
pre-observation belief, the simulated human transitions and emits, and the
belief then absorbs the (action, observation) pair.  Replaying a recorded
trace through :func:`trustcal.model.belief_update` reproduces the recorded
belief series exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .categories import (
    CONTEXTS,
    GAZE_LEVELS,
    N_JOINT_STATES,
    RELIANCE_LEVELS,
    ActionTuple,
    Context,
    ObservationTuple,
    context_index,
    full_action,
    reliability_index,
)
from .errors import EmptySpec, ZeroLikelihood
from .model import TrustWorkloadModel, belief_update
from .solver import QmdpPolicy, qmdp_action


@dataclass
class StepResponse:
    """Marginal High-state probabilities under one constant action."""

    action: ActionTuple
    horizon: int
    p_trust_high: np.ndarray
    p_workload_high: np.ndarray
    joint: np.ndarray  # (horizon + 1, 4) full distribution per frame


def step_response(model: TrustWorkloadModel, a: ActionTuple, horizon: int,
                  initial: np.ndarray | None = None) -> StepResponse:
    """Propagate the joint state marginal under a constant action.

    The series has ``horizon + 1`` entries; index 0 is the initial
    distribution (the model priors unless overridden).
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    a = ActionTuple(*a)
    p = model.joint_prior.copy() if initial is None \
        else np.asarray(initial, dtype=np.float64).copy()
    if p.shape != (N_JOINT_STATES,) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("initial must be a distribution over the 4 joint states")
    m = model.transition_matrix(a)
    joint = np.empty((horizon + 1, N_JOINT_STATES))
    joint[0] = p
    for t in range(1, horizon + 1):
        p = p @ m
        joint[t] = p
    trust_high = joint[:, 2] + joint[:, 3]
    workload_high = joint[:, 1] + joint[:, 3]
    return StepResponse(action=a, horizon=horizon, p_trust_high=trust_high,
                        p_workload_high=workload_high, joint=joint)


def stationary_distribution(model: TrustWorkloadModel,
                            a: ActionTuple) -> np.ndarray:
    """Stationary distribution of the joint chain under a constant action.

    Solved as the linear fixed point p = pM with the normalization row
    appended; independent of the iterative propagation in step_response.
    """
    m = model.transition_matrix(a)
    system = np.vstack([(m.T - np.eye(N_JOINT_STATES)), np.ones(N_JOINT_STATES)])
    rhs = np.zeros(N_JOINT_STATES + 1)
    rhs[-1] = 1.0
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return solution


@dataclass
class TraceStep:
    t: int
    context: Context
    action: str  # transparency level chosen by the policy
    observation: ObservationTuple
    belief: np.ndarray
    reward: float
    true_state: int | None = None
    belief_reset: bool = False


@dataclass
class EvalMetrics:
    discounted_return: float
    calibration_rate: float
    transparency_on_rate: float
    belief_rmse: float
    n_frames: int
    zero_likelihood_resets: int = 0


@dataclass
class ClosedLoopResult:
    metrics: EvalMetrics
    trace: list = field(default_factory=list)


def run_closed_loop(true_model: TrustWorkloadModel,
                    belief_model: TrustWorkloadModel, policy: QmdpPolicy,
                    scenario, rng_seed: int,
                    min_dwell_frames: int = 0) -> ClosedLoopResult:
    """Simulate a human (true_model) against the policy's belief tracker.

    ``scenario`` lists the uncontrollable context per frame.  Metrics use the
    policy's reward and discount; calibration and belief error are scored
    against the simulated true state.  ``min_dwell_frames`` holds each
    transparency choice for at least that many frames to suppress flicker
    (0 disables the hold and queries the policy every frame).
    """
    if not scenario:
        raise EmptySpec("scenario must contain at least one context")
    if min_dwell_frames < 0:
        raise ValueError("min_dwell_frames must be nonnegative")
    contexts = [Context(*c) for c in scenario]
    for c in contexts:
        context_index(c)  # validates
    rng = np.random.default_rng(rng_seed)
    gamma = policy.config.gamma
    reward_table = policy.reward.table

    # hidden state starts at the prior one step before the first frame
    t_idx = _draw(rng, true_model.prior_trust)
    w_idx = _draw(rng, true_model.prior_workload)
    belief = belief_model.joint_prior.copy()

    trace = []
    discounted = 0.0
    calibrated = 0
    on_frames = 0
    sq_err = 0.0
    resets = 0
    held_action = None
    held_for = 0
    for frame, ctx in enumerate(contexts):
        transparency = qmdp_action(policy, belief, ctx)
        if held_action is not None and held_for < min_dwell_frames:
            transparency = held_action
        if transparency != held_action:
            held_action = transparency
            held_for = 0
        held_for += 1
        a = full_action(transparency, ctx)
        ia = true_model.structure.trust_action_index(a)
        iw = true_model.structure.workload_action_index(a)
        t_next = _draw(rng, true_model.trans_trust[ia, t_idx, w_idx])
        w_next = _draw(rng, true_model.trans_workload[iw, t_idx, w_idx])
        t_idx, w_idx = t_next, w_next
        obs = ObservationTuple(
            RELIANCE_LEVELS[_draw(rng, true_model.emit_trust[t_idx])],
            GAZE_LEVELS[_draw(rng, true_model.emit_workload[w_idx])])
        reset = False
        try:
            belief = belief_update(belief_model, belief, a, obs)
        except ZeroLikelihood:
            belief = belief_model.joint_prior.copy()
            reset = True
            resets += 1

        rel_idx = reliability_index(ctx.reliability)
        r = float(reward_table[t_idx, rel_idx])
        discounted += (gamma ** frame) * r
        calibrated += r >= 0.0
        on_frames += transparency == "AR_on"
        p_t_high = belief[2] + belief[3]
        sq_err += (p_t_high - float(t_idx)) ** 2
        trace.append(TraceStep(
            t=frame, context=ctx, action=transparency, observation=obs,
            belief=belief.copy(), reward=r,
            true_state=2 * t_idx + w_idx, belief_reset=reset))

    n = len(contexts)
    metrics = EvalMetrics(
        discounted_return=discounted,
        calibration_rate=calibrated / n,
        transparency_on_rate=on_frames / n,
        belief_rmse=float(np.sqrt(sq_err / n)),
        n_frames=n,
        zero_likelihood_resets=resets)
    return ClosedLoopResult(metrics=metrics, trace=trace)


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if r < acc:
            return i
    return len(probs) - 1


def scenario_generate(segments=None, *, n_episodes: int | None = None,
                      episode_frames: int | None = None,
                      dist=None, rng_seed: int | None = None):
    """Build a per-frame context schedule.

    Either concatenate explicit ``segments`` of (context, duration_frames)
    pairs, or draw one context per episode i.i.d. from ``dist`` (uniform by
    default) and hold it for ``episode_frames`` frames.
    """
    if segments is not None:
        if not segments:
            raise EmptySpec("segments must be nonempty")
        out = []
        for context, duration in segments:
            duration = int(duration)
            if duration < 1:
                raise EmptySpec("segment durations must be at least 1 frame")
            ctx = Context(*context)
            context_index(ctx)
            out.extend([ctx] * duration)
        return out
    if n_episodes is None or episode_frames is None or rng_seed is None:
        raise EmptySpec("random mode needs n_episodes, episode_frames, and "
                        "rng_seed")
    if n_episodes < 1 or episode_frames < 1:
        raise EmptySpec("n_episodes and episode_frames must be at least 1")
    p = np.full(len(CONTEXTS), 1.0 / len(CONTEXTS)) if dist is None \
        else np.asarray(dist, dtype=np.float64)
    if p.shape != (len(CONTEXTS),) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("dist must be a distribution over the 12 contexts")
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(n_episodes):
        ctx = CONTEXTS[_draw(rng, p)]
        out.extend([ctx] * episode_frames)
    return out
