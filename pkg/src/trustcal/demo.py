"""A hand-specified example model for demos, docs, and smoke tests.

The tables are not fitted to any data; they encode plausible qualitative
dynamics: transparency cues prop up trust when automation reliability is low
and add workload, pedestrians add workload, high reliability drives trust
up regardless, and a distracted (high-workload) human updates trust more
slowly.  Useful wherever a realistic, fully-supported, labeled model is
needed without running an estimation first.
"""

from __future__ import annotations

import numpy as np

from .categories import N_TRUST, N_WORKLOAD
from .model import SELECTED_STRUCTURE, TrustWorkloadModel

# per-frame adjustment rates at 25 fps
_TRUST_RATE = 0.08
_WORKLOAD_RATE = 0.10


def _trust_target(transparency: str, reliability: str) -> float:
    base = {"Rel_low": 0.05, "Rel_mid": 0.30, "Rel_high": 0.95}[reliability]
    if transparency == "AR_on":
        # cues mostly rescue low/medium-reliability trust
        base = {"Rel_low": 0.55, "Rel_mid": 0.60, "Rel_high": 0.98}[reliability]
    return base


def _workload_target(transparency: str, reliability: str,
                     pedestrians: str) -> float:
    target = 0.20
    if pedestrians == "Peds_present":
        target += 0.30
    if transparency == "AR_on":
        target += 0.25
    if reliability == "Rel_low":
        target += 0.10
    return min(target, 0.95)


def demo_model() -> TrustWorkloadModel:
    structure = SELECTED_STRUCTURE
    trans_trust = np.empty((structure.n_trust_actions, N_TRUST, N_WORKLOAD,
                            N_TRUST))
    for ia, action in enumerate(structure.trust_actions):
        transparency, reliability = action
        target = _trust_target(transparency, reliability)
        for st in range(N_TRUST):
            for sw in range(N_WORKLOAD):
                rate = _TRUST_RATE * (0.5 if sw == 1 else 1.0)
                p_high = (1.0 - rate) * float(st) + rate * target
                trans_trust[ia, st, sw] = (1.0 - p_high, p_high)

    trans_workload = np.empty((structure.n_workload_actions, N_TRUST,
                               N_WORKLOAD, N_WORKLOAD))
    for iw, action in enumerate(structure.workload_actions):
        transparency, reliability, pedestrians = action
        target = _workload_target(transparency, reliability, pedestrians)
        for st in range(N_TRUST):
            for sw in range(N_WORKLOAD):
                eff = min(target + (0.10 if st == 0 else 0.0), 0.95)
                p_high = (1.0 - _WORKLOAD_RATE) * float(sw) \
                    + _WORKLOAD_RATE * eff
                trans_workload[iw, st, sw] = (1.0 - p_high, p_high)

    return TrustWorkloadModel(
        structure=structure,
        prior_trust=[0.25, 0.75],
        prior_workload=[0.60, 0.40],
        trans_trust=trans_trust,
        trans_workload=trans_workload,
        emit_trust=[[0.92, 0.08],
                    [0.04, 0.96]],
        emit_workload=[[0.55, 0.30, 0.04, 0.04, 0.07],
                       [0.28, 0.22, 0.18, 0.14, 0.18]],
    )
