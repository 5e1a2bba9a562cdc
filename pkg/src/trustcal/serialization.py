"""Versioned text documents for models and policies.

Both formats are JSON with explicit category names on every table key, so a
document is readable without this package and survives category-order bugs.
Floats are written with Python's shortest round-trip repr, which preserves
all 17 significant digits; a load immediately followed by a save is
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .categories import (
    CONTEXTS,
    GAZE_LEVELS,
    JOINT_STATES,
    PEDESTRIAN_LEVELS,
    RELIABILITY_LEVELS,
    RELIANCE_LEVELS,
    TRAFFIC_LEVELS,
    TRANSPARENCY_LEVELS,
    TRUST_LEVELS,
    WORKLOAD_LEVELS,
)
from .errors import SchemaMismatch
from .model import ActionStructure, RewardSpec, TrustWorkloadModel

MODEL_SCHEMA = "twmodel/1"
POLICY_SCHEMA = "twpolicy/1"

# the category vocabulary embedded in every document
_CATEGORIES = {
    "trust": list(TRUST_LEVELS),
    "workload": list(WORKLOAD_LEVELS),
    "transparency": list(TRANSPARENCY_LEVELS),
    "reliability": list(RELIABILITY_LEVELS),
    "traffic": list(TRAFFIC_LEVELS),
    "pedestrians": list(PEDESTRIAN_LEVELS),
    "reliance": list(RELIANCE_LEVELS),
    "gaze": list(GAZE_LEVELS),
}

EMPTY_ACTION_KEY = "-"


def _action_key(dims, action) -> str:
    if not dims:
        return EMPTY_ACTION_KEY
    return ",".join(f"{d}={v}" for d, v in zip(dims, action))


def _state_key(state) -> str:
    return f"{state.trust}|{state.workload}"


def _context_key(context) -> str:
    return "|".join(context)


def _trans_table(dims, actions, table, next_levels) -> dict:
    out = {}
    for i, action in enumerate(actions):
        rows = {}
        for j, state in enumerate(JOINT_STATES):
            st, sw = divmod(j, 2)
            rows[_state_key(state)] = dict(zip(next_levels,
                                               table[i, st, sw].tolist()))
        out[_action_key(dims, action)] = rows
    return out


def _emit_table(levels, table, obs_levels) -> dict:
    return {level: dict(zip(obs_levels, table[i].tolist()))
            for i, level in enumerate(levels)}


def model_to_document(model: TrustWorkloadModel,
                      invocation: str | None = None) -> str:
    doc = {"schema": MODEL_SCHEMA}
    if invocation is not None:
        doc["invocation"] = invocation
    s = model.structure
    doc["structure"] = {"trust_dims": list(s.trust_dim_order),
                        "workload_dims": list(s.workload_dim_order)}
    doc["categories"] = _CATEGORIES
    doc["prior_trust"] = dict(zip(TRUST_LEVELS, model.prior_trust.tolist()))
    doc["prior_workload"] = dict(zip(WORKLOAD_LEVELS,
                                     model.prior_workload.tolist()))
    doc["trans_trust"] = _trans_table(s.trust_dim_order, s.trust_actions,
                                      model.trans_trust, TRUST_LEVELS)
    doc["trans_workload"] = _trans_table(s.workload_dim_order,
                                         s.workload_actions,
                                         model.trans_workload, WORKLOAD_LEVELS)
    doc["emit_trust"] = _emit_table(TRUST_LEVELS, model.emit_trust,
                                    RELIANCE_LEVELS)
    doc["emit_workload"] = _emit_table(WORKLOAD_LEVELS, model.emit_workload,
                                       GAZE_LEVELS)
    return json.dumps(doc, indent=2) + "\n"


def _check_schema(doc: dict, expected: str, what: str) -> None:
    schema = doc.get("schema")
    if schema != expected:
        raise SchemaMismatch(
            f"{what} document has schema {schema!r}, expected {expected!r}")
    categories = doc.get("categories")
    if categories is not None:
        for key, levels in _CATEGORIES.items():
            if key in categories and list(categories[key]) != levels:
                raise SchemaMismatch(
                    f"{what} document {key} categories {categories[key]} do "
                    f"not match this package's {levels}")


def _parse_trans(entries: dict, dims, actions, next_levels) -> np.ndarray:
    table = np.empty((len(actions), 2, 2, len(next_levels)))
    for i, action in enumerate(actions):
        key = _action_key(dims, action)
        try:
            rows = entries[key]
        except KeyError:
            raise SchemaMismatch(f"missing transition rows for action {key!r}") \
                from None
        for j, state in enumerate(JOINT_STATES):
            st, sw = divmod(j, 2)
            row = rows[_state_key(state)]
            table[i, st, sw] = [row[level] for level in next_levels]
    return table


def model_from_document(text: str) -> TrustWorkloadModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"model document is not valid JSON: {exc}") from None
    _check_schema(doc, MODEL_SCHEMA, "model")
    try:
        structure = ActionStructure(
            trust_dims=frozenset(doc["structure"]["trust_dims"]),
            workload_dims=frozenset(doc["structure"]["workload_dims"]))
        prior_t = [doc["prior_trust"][level] for level in TRUST_LEVELS]
        prior_w = [doc["prior_workload"][level] for level in WORKLOAD_LEVELS]
        trans_t = _parse_trans(doc["trans_trust"], structure.trust_dim_order,
                               structure.trust_actions, TRUST_LEVELS)
        trans_w = _parse_trans(doc["trans_workload"],
                               structure.workload_dim_order,
                               structure.workload_actions, WORKLOAD_LEVELS)
        emit_t = [[doc["emit_trust"][level][o] for o in RELIANCE_LEVELS]
                  for level in TRUST_LEVELS]
        emit_w = [[doc["emit_workload"][level][o] for o in GAZE_LEVELS]
                  for level in WORKLOAD_LEVELS]
    except KeyError as exc:
        raise SchemaMismatch(f"model document is missing entry {exc}") from None
    return TrustWorkloadModel(
        structure=structure, prior_trust=prior_t, prior_workload=prior_w,
        trans_trust=trans_t, trans_workload=trans_w, emit_trust=emit_t,
        emit_workload=emit_w)


def policy_to_document(policy, invocation: str | None = None) -> str:
    doc = {"schema": POLICY_SCHEMA}
    if invocation is not None:
        doc["invocation"] = invocation
    doc["categories"] = _CATEGORIES
    doc["gamma"] = policy.config.gamma
    doc["vi_tol"] = policy.config.vi_tol
    doc["uncontrollable_dist"] = {
        _context_key(c): float(p)
        for c, p in zip(CONTEXTS, policy.config.uncontrollable_dist)}
    doc["reward"] = {level: dict(zip(RELIABILITY_LEVELS,
                                     policy.reward.table[i].tolist()))
                     for i, level in enumerate(TRUST_LEVELS)}
    q = {}
    for j, state in enumerate(JOINT_STATES):
        per_action = {}
        for k, transparency in enumerate(TRANSPARENCY_LEVELS):
            per_action[transparency] = {
                _context_key(c): float(policy.q[j, k, u])
                for u, c in enumerate(CONTEXTS)}
        q[_state_key(state)] = per_action
    doc["q"] = q
    return json.dumps(doc, indent=2) + "\n"


def policy_from_document(text: str):
    from .solver import QmdpPolicy, SolverConfig

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"policy document is not valid JSON: {exc}") from None
    _check_schema(doc, POLICY_SCHEMA, "policy")
    try:
        dist = [doc["uncontrollable_dist"][_context_key(c)] for c in CONTEXTS]
        config = SolverConfig(gamma=doc["gamma"], vi_tol=doc["vi_tol"],
                              uncontrollable_dist=dist)
        reward = RewardSpec(table=[
            [doc["reward"][level][r] for r in RELIABILITY_LEVELS]
            for level in TRUST_LEVELS])
        q = np.empty((len(JOINT_STATES), len(TRANSPARENCY_LEVELS),
                      len(CONTEXTS)))
        for j, state in enumerate(JOINT_STATES):
            for k, transparency in enumerate(TRANSPARENCY_LEVELS):
                entries = doc["q"][_state_key(state)][transparency]
                q[j, k] = [entries[_context_key(c)] for c in CONTEXTS]
    except KeyError as exc:
        raise SchemaMismatch(f"policy document is missing entry {exc}") from None
    return QmdpPolicy(q=q, reward=reward, config=config)


def categories_of_document(text: str) -> dict:
    """The category vocabulary a document was written against."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"document is not valid JSON: {exc}") from None
    return doc.get("categories", {})


def write_document(path, text: str) -> None:
    Path(path).write_text(text)


def read_document(path) -> str:
    return Path(path).read_text()
