"""Factored trust-workload state-space model.

Two binary latent factors (trust, workload) evolve jointly: each factor's
next value depends on the full previous joint state and on a configurable
subset of the action dimensions, while the two next values are conditionally
independent given that history.  Reliance observations are emitted by the
trust factor alone and gaze observations by the workload factor alone.

All distributions are plain float64 numpy arrays in the canonical category
orders of :mod:`trustcal.categories`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .categories import (
    ACTION_DIMS,
    DIM_LEVELS,
    N_GAZE,
    N_JOINT_STATES,
    N_RELIANCE,
    N_TRUST,
    N_WORKLOAD,
    RELIABILITY_LEVELS,
    ActionTuple,
    JointState,
    ObservationTuple,
    gaze_index,
    joint_state_index,
    reliance_index,
)
from .errors import AmbiguousLabel, EmptySequence, ZeroLikelihood

if TYPE_CHECKING:
    from .data import InteractionSequence

ROW_SUM_ATOL = 1e-9
LABEL_TIE_ATOL = 1e-9


@dataclass(frozen=True)
class ActionStructure:
    """Which action dimensions condition each latent factor's transitions.

    ``reliability`` must always drive trust; any subset of the four
    dimensions (including the empty set) may drive workload.
    """

    trust_dims: frozenset
    workload_dims: frozenset

    def __post_init__(self):
        object.__setattr__(self, "trust_dims", frozenset(self.trust_dims))
        object.__setattr__(self, "workload_dims", frozenset(self.workload_dims))
        for dims, factor in ((self.trust_dims, "trust"),
                             (self.workload_dims, "workload")):
            unknown = dims - set(ACTION_DIMS)
            if unknown:
                raise ValueError(
                    f"unknown {factor} action dimensions: {sorted(unknown)}")
        if "reliability" not in self.trust_dims:
            raise ValueError("trust dynamics must include reliability")

    def dims_for(self, factor: str) -> frozenset:
        if factor == "trust":
            return self.trust_dims
        if factor == "workload":
            return self.workload_dims
        raise ValueError(f"unknown factor {factor!r}")

    @cached_property
    def trust_dim_order(self) -> tuple:
        return tuple(d for d in ACTION_DIMS if d in self.trust_dims)

    @cached_property
    def workload_dim_order(self) -> tuple:
        return tuple(d for d in ACTION_DIMS if d in self.workload_dims)

    @cached_property
    def trust_actions(self) -> tuple:
        """All reduced trust-action tuples in canonical order."""
        return tuple(itertools.product(
            *(DIM_LEVELS[d] for d in self.trust_dim_order)))

    @cached_property
    def workload_actions(self) -> tuple:
        return tuple(itertools.product(
            *(DIM_LEVELS[d] for d in self.workload_dim_order)))

    @cached_property
    def _trust_action_index(self) -> dict:
        return {a: i for i, a in enumerate(self.trust_actions)}

    @cached_property
    def _workload_action_index(self) -> dict:
        return {a: i for i, a in enumerate(self.workload_actions)}

    @property
    def n_trust_actions(self) -> int:
        return len(self.trust_actions)

    @property
    def n_workload_actions(self) -> int:
        return len(self.workload_actions)

    def trust_action_index(self, a: ActionTuple) -> int:
        return self._trust_action_index[reduce_action(self, a, "trust")]

    def workload_action_index(self, a: ActionTuple) -> int:
        return self._workload_action_index[reduce_action(self, a, "workload")]


#: The structure retained after model selection on the study data: trust is
#: driven by transparency and reliability; workload by transparency,
#: reliability, and intersection pedestrians.  Traffic density drives neither.
SELECTED_STRUCTURE = ActionStructure(
    trust_dims=frozenset({"transparency", "reliability"}),
    workload_dims=frozenset({"transparency", "reliability", "pedestrians"}),
)

FULL_STRUCTURE = ActionStructure(
    trust_dims=frozenset(ACTION_DIMS),
    workload_dims=frozenset(ACTION_DIMS),
)


def reduce_action(structure: ActionStructure, a: ActionTuple, factor: str):
    """Project a full action tuple onto the dimensions a factor listens to.

    Components keep the canonical dimension order, so the result is a valid
    key into the factor's transition table.
    """
    a = ActionTuple(*a)
    if factor == "trust":
        dims = structure.trust_dim_order
    elif factor == "workload":
        dims = structure.workload_dim_order
    else:
        raise ValueError(f"unknown factor {factor!r}")
    return tuple(getattr(a, d) for d in dims)


def _as_table(name: str, value, shape: tuple) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains negative probabilities")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > ROW_SUM_ATOL):
        raise ValueError(f"{name} rows must sum to 1 within {ROW_SUM_ATOL}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrustWorkloadModel:
    """Priors, factored transitions, and factored emissions.

    Table axes (all indexed in canonical category order):

    * ``prior_trust``:     (trust,)
    * ``prior_workload``:  (workload,)
    * ``trans_trust``:     (reduced trust action, trust, workload, next trust)
    * ``trans_workload``:  (reduced workload action, trust, workload, next workload)
    * ``emit_trust``:      (trust, reliance)
    * ``emit_workload``:   (workload, gaze)

    Instances are immutable (arrays are marked read-only) and safe to share
    across threads and processes.
    """

    structure: ActionStructure
    prior_trust: np.ndarray
    prior_workload: np.ndarray
    trans_trust: np.ndarray
    trans_workload: np.ndarray
    emit_trust: np.ndarray
    emit_workload: np.ndarray

    def __post_init__(self):
        nat = self.structure.n_trust_actions
        naw = self.structure.n_workload_actions
        object.__setattr__(self, "prior_trust", _as_table(
            "prior_trust", self.prior_trust, (N_TRUST,)))
        object.__setattr__(self, "prior_workload", _as_table(
            "prior_workload", self.prior_workload, (N_WORKLOAD,)))
        object.__setattr__(self, "trans_trust", _as_table(
            "trans_trust", self.trans_trust, (nat, N_TRUST, N_WORKLOAD, N_TRUST)))
        object.__setattr__(self, "trans_workload", _as_table(
            "trans_workload", self.trans_workload,
            (naw, N_TRUST, N_WORKLOAD, N_WORKLOAD)))
        object.__setattr__(self, "emit_trust", _as_table(
            "emit_trust", self.emit_trust, (N_TRUST, N_RELIANCE)))
        object.__setattr__(self, "emit_workload", _as_table(
            "emit_workload", self.emit_workload, (N_WORKLOAD, N_GAZE)))

    @cached_property
    def joint_prior(self) -> np.ndarray:
        """Initial distribution over the 4 joint states."""
        p = np.outer(self.prior_trust, self.prior_workload).reshape(N_JOINT_STATES)
        p.setflags(write=False)
        return p

    @cached_property
    def joint_emission_table(self) -> np.ndarray:
        """(joint state, reliance, gaze) emission probabilities."""
        tab = np.einsum("ar,bg->abrg", self.emit_trust, self.emit_workload)
        tab = tab.reshape(N_JOINT_STATES, N_RELIANCE, N_GAZE)
        tab.setflags(write=False)
        return tab

    def transition_matrix(self, a: ActionTuple) -> np.ndarray:
        """4x4 joint transition matrix ``M[s, s']`` for a full action."""
        tt = self.trans_trust[self.structure.trust_action_index(a)]
        tw = self.trans_workload[self.structure.workload_action_index(a)]
        m = np.einsum("abc,abd->abcd", tt, tw)
        return m.reshape(N_JOINT_STATES, N_JOINT_STATES)

    def emission_vector(self, o: ObservationTuple) -> np.ndarray:
        """Per-joint-state probability of one observation tuple."""
        o = ObservationTuple(*o)
        return self.joint_emission_table[:, reliance_index(o.reliance),
                                         gaze_index(o.gaze)]


def joint_transition(model: TrustWorkloadModel, s: JointState,
                     a: ActionTuple) -> np.ndarray:
    """Next-joint-state distribution: the product of the two factor rows."""
    return model.transition_matrix(a)[joint_state_index(JointState(*s))].copy()


def joint_emission(model: TrustWorkloadModel, s: JointState,
                   o: ObservationTuple) -> float:
    o = ObservationTuple(*o)
    return float(model.joint_emission_table[
        joint_state_index(JointState(*s)),
        reliance_index(o.reliance),
        gaze_index(o.gaze)])


def belief_update(model: TrustWorkloadModel, b: np.ndarray, a: ActionTuple,
                  o: ObservationTuple) -> np.ndarray:
    """One predict-correct step of the 4-state Bayes filter.

    Raises :class:`ZeroLikelihood` when the observation has zero probability
    under the predicted belief; callers choose their own fallback.
    """
    b = np.asarray(b, dtype=np.float64)
    predicted = b @ model.transition_matrix(a)
    unnormalized = predicted * model.emission_vector(o)
    mass = unnormalized.sum()
    if mass <= 0.0:
        raise ZeroLikelihood(
            f"observation {ObservationTuple(*o)} is impossible under the model")
    return unnormalized / mass


def forward_filter(model: TrustWorkloadModel,
                   seq: "InteractionSequence") -> np.ndarray:
    """Normalized forward variables, one row per frame.

    Frame 1 is the prior conditioned on its observation (no transition);
    every later frame is one :func:`belief_update` step.
    """
    steps = seq.steps
    if not steps:
        raise EmptySequence(f"sequence {seq.id!r} has no frames")
    beliefs = np.empty((len(steps), N_JOINT_STATES))
    unnormalized = model.joint_prior * model.emission_vector(steps[0].observation)
    mass = unnormalized.sum()
    if mass <= 0.0:
        raise ZeroLikelihood(
            f"first observation of {seq.id!r} is impossible under the model")
    beliefs[0] = unnormalized / mass
    for i, step in enumerate(steps[1:], start=1):
        beliefs[i] = belief_update(model, beliefs[i - 1], step.action,
                                   step.observation)
    return beliefs


def sequence_log_likelihood(model: TrustWorkloadModel,
                            seq: "InteractionSequence") -> float:
    """Log probability of the observations given the actions.

    Scaled forward recursion; the per-step normalizers are the scaling
    constants, and their log-sum is the sequence log-likelihood.  Returns
    ``-inf`` when the data is impossible under the model.
    """
    steps = seq.steps
    if not steps:
        raise EmptySequence(f"sequence {seq.id!r} has no frames")
    alpha = model.joint_prior * model.emission_vector(steps[0].observation)
    total = 0.0
    for i, step in enumerate(steps):
        if i > 0:
            alpha = (alpha @ model.transition_matrix(step.action)) \
                * model.emission_vector(step.observation)
        scale = alpha.sum()
        if scale <= 0.0:
            return -math.inf
        total += math.log(scale)
        alpha = alpha / scale
    return total


@dataclass(frozen=True)
class StateLabeling:
    """Which raw latent index was identified as the High state of each factor."""

    trust_high_index: int
    workload_high_index: int

    @property
    def is_canonical(self) -> bool:
        return self.trust_high_index == 1 and self.workload_high_index == 1


def emission_entropy(model: TrustWorkloadModel) -> np.ndarray:
    """Shannon entropy (nats) of each workload state's gaze distribution."""
    p = model.emit_workload
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)


def label_states(model: TrustWorkloadModel):
    """Name the latent states and return the canonically ordered model.

    High trust is the state most likely to emit reliance; high workload is
    the state with the larger gaze-emission entropy.  Returns
    ``(relabeled_model, StateLabeling)`` where the labeling records which raw
    indices were identified as High.  Idempotent on already-labeled models.
    """
    rely = model.emit_trust[:, reliance_index("R_plus")]
    if abs(rely[0] - rely[1]) <= LABEL_TIE_ATOL:
        raise AmbiguousLabel(
            f"reliance emission probabilities tie at {rely[0]:.12g}")
    trust_high = int(np.argmax(rely))

    entropies = emission_entropy(model)
    if abs(entropies[0] - entropies[1]) <= LABEL_TIE_ATOL:
        raise AmbiguousLabel(
            f"gaze emission entropies tie at {entropies[0]:.12g}")
    workload_high = int(np.argmax(entropies))

    labeling = StateLabeling(trust_high, workload_high)
    if labeling.is_canonical:
        return model, labeling

    pt = [0, 1] if trust_high == 1 else [1, 0]
    pw = [0, 1] if workload_high == 1 else [1, 0]
    relabeled = TrustWorkloadModel(
        structure=model.structure,
        prior_trust=model.prior_trust[pt],
        prior_workload=model.prior_workload[pw],
        trans_trust=model.trans_trust[:, pt][:, :, pw][:, :, :, pt],
        trans_workload=model.trans_workload[:, pt][:, :, pw][:, :, :, pw],
        emit_trust=model.emit_trust[pt],
        emit_workload=model.emit_workload[pw],
    )
    return relabeled, labeling


@dataclass(frozen=True, eq=False)
class RewardSpec:
    """State-reliability reward used to score trust calibration.

    ``table[trust, reliability]``; the default rewards low trust under low
    reliability and high trust under high reliability (+1), penalizes the
    two miscalibrated corners (-1), and is neutral at medium reliability.
    """

    table: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.table, dtype=np.float64)
        if arr.shape != (N_TRUST, len(RELIABILITY_LEVELS)):
            raise ValueError(
                f"reward table must have shape ({N_TRUST}, "
                f"{len(RELIABILITY_LEVELS)}), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("reward table contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    @classmethod
    def calibration_default(cls) -> "RewardSpec":
        return cls(table=[[1.0, 0.0, -1.0],
                          [-1.0, 0.0, 1.0]])

    def value(self, trust_idx: int, reliability_idx: int) -> float:
        return float(self.table[trust_idx, reliability_idx])

    def per_state_vector(self, reliability_idx: int) -> np.ndarray:
        """Reward per joint state for a fixed reliability level."""
        per_trust = self.table[:, reliability_idx]
        return np.repeat(per_trust, N_WORKLOAD)


def random_model(structure: ActionStructure,
                 rng: np.random.Generator) -> TrustWorkloadModel:
    """Draw every distribution row from a flat Dirichlet.

    Draw order is fixed (priors, trust transitions, workload transitions,
    trust emissions, workload emissions) so a seeded generator yields a
    reproducible model.
    """
    return TrustWorkloadModel(
        structure=structure,
        prior_trust=rng.dirichlet(np.ones(N_TRUST)),
        prior_workload=rng.dirichlet(np.ones(N_WORKLOAD)),
        trans_trust=rng.dirichlet(
            np.ones(N_TRUST),
            size=(structure.n_trust_actions, N_TRUST, N_WORKLOAD)),
        trans_workload=rng.dirichlet(
            np.ones(N_WORKLOAD),
            size=(structure.n_workload_actions, N_TRUST, N_WORKLOAD)),
        emit_trust=rng.dirichlet(np.ones(N_RELIANCE), size=N_TRUST),
        emit_workload=rng.dirichlet(np.ones(N_GAZE), size=N_WORKLOAD),
    )
