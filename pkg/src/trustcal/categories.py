"""Categorical vocabularies and their canonical enumeration orders.

Every probability table, serialized document, and CSV column in the package
indexes categories in exactly the orders defined here, so treat these tuples
as part of the wire format.
"""

from __future__ import annotations

from typing import NamedTuple

TRUST_LEVELS = ("T_low", "T_high")
WORKLOAD_LEVELS = ("W_low", "W_high")

TRANSPARENCY_LEVELS = ("AR_off", "AR_on")
RELIABILITY_LEVELS = ("Rel_low", "Rel_mid", "Rel_high")
TRAFFIC_LEVELS = ("Traffic_low", "Traffic_high")
PEDESTRIAN_LEVELS = ("Peds_absent", "Peds_present")

RELIANCE_LEVELS = ("R_minus", "R_plus")
GAZE_LEVELS = ("G_road", "G_vehi", "G_ped", "G_side", "G_oth")

# Canonical ordering of action dimensions; reduced-action tuples always list
# their components in this order.
ACTION_DIMS = ("transparency", "reliability", "traffic", "pedestrians")
DIM_LEVELS = {
    "transparency": TRANSPARENCY_LEVELS,
    "reliability": RELIABILITY_LEVELS,
    "traffic": TRAFFIC_LEVELS,
    "pedestrians": PEDESTRIAN_LEVELS,
}

N_TRUST = len(TRUST_LEVELS)
N_WORKLOAD = len(WORKLOAD_LEVELS)
N_RELIANCE = len(RELIANCE_LEVELS)
N_GAZE = len(GAZE_LEVELS)
N_TRANSPARENCY = len(TRANSPARENCY_LEVELS)
N_JOINT_STATES = N_TRUST * N_WORKLOAD


class JointState(NamedTuple):
    trust: str
    workload: str


class ActionTuple(NamedTuple):
    transparency: str
    reliability: str
    traffic: str
    pedestrians: str


class ObservationTuple(NamedTuple):
    reliance: str
    gaze: str


class Context(NamedTuple):
    """The uncontrollable part of an action: everything but transparency."""

    reliability: str
    traffic: str
    pedestrians: str


# Canonical joint-state order: (T_low,W_low), (T_low,W_high), (T_high,W_low),
# (T_high,W_high); index = 2 * trust_index + workload_index.
JOINT_STATES = tuple(
    JointState(t, w) for t in TRUST_LEVELS for w in WORKLOAD_LEVELS
)

CONTEXTS = tuple(
    Context(r, t, p)
    for r in RELIABILITY_LEVELS
    for t in TRAFFIC_LEVELS
    for p in PEDESTRIAN_LEVELS
)
N_CONTEXTS = len(CONTEXTS)

# All 24 full actions in canonical order (dimension-major product).
FULL_ACTIONS = tuple(
    ActionTuple(a, r, t, p)
    for a in TRANSPARENCY_LEVELS
    for r in RELIABILITY_LEVELS
    for t in TRAFFIC_LEVELS
    for p in PEDESTRIAN_LEVELS
)
N_FULL_ACTIONS = len(FULL_ACTIONS)

_TRUST_INDEX = {name: i for i, name in enumerate(TRUST_LEVELS)}
_WORKLOAD_INDEX = {name: i for i, name in enumerate(WORKLOAD_LEVELS)}
_RELIANCE_INDEX = {name: i for i, name in enumerate(RELIANCE_LEVELS)}
_GAZE_INDEX = {name: i for i, name in enumerate(GAZE_LEVELS)}
_TRANSPARENCY_INDEX = {name: i for i, name in enumerate(TRANSPARENCY_LEVELS)}
_RELIABILITY_INDEX = {name: i for i, name in enumerate(RELIABILITY_LEVELS)}
_CONTEXT_INDEX = {c: i for i, c in enumerate(CONTEXTS)}
_FULL_ACTION_INDEX = {a: i for i, a in enumerate(FULL_ACTIONS)}


def trust_index(name: str) -> int:
    try:
        return _TRUST_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown trust level {name!r}") from None


def workload_index(name: str) -> int:
    try:
        return _WORKLOAD_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown workload level {name!r}") from None


def reliance_index(name: str) -> int:
    try:
        return _RELIANCE_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown reliance level {name!r}") from None


def gaze_index(name: str) -> int:
    try:
        return _GAZE_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown gaze category {name!r}") from None


def transparency_index(name: str) -> int:
    try:
        return _TRANSPARENCY_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown transparency level {name!r}") from None


def reliability_index(name: str) -> int:
    try:
        return _RELIABILITY_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown reliability level {name!r}") from None


def full_action_index(a: ActionTuple) -> int:
    try:
        return _FULL_ACTION_INDEX[ActionTuple(*a)]
    except KeyError:
        raise ValueError(f"unknown action tuple {a!r}") from None


def joint_state_index(state: JointState) -> int:
    return N_WORKLOAD * trust_index(state.trust) + workload_index(state.workload)


def context_index(context: Context) -> int:
    try:
        return _CONTEXT_INDEX[Context(*context)]
    except KeyError:
        raise ValueError(f"unknown uncontrollable context {context!r}") from None


def validate_action(a: ActionTuple) -> ActionTuple:
    a = ActionTuple(*a)
    for dim, value in zip(ACTION_DIMS, a):
        if value not in DIM_LEVELS[dim]:
            raise ValueError(f"unknown {dim} category {value!r}")
    return a


def validate_observation(o: ObservationTuple) -> ObservationTuple:
    o = ObservationTuple(*o)
    reliance_index(o.reliance)
    gaze_index(o.gaze)
    return o


def full_action(transparency: str, context: Context) -> ActionTuple:
    """Assemble a full action tuple from the controllable and context parts."""
    return ActionTuple(transparency, context.reliability, context.traffic,
                       context.pedestrians)
