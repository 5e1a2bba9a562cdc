import numpy as np

from trustcal.categories import FULL_ACTIONS, ActionTuple
from trustcal.data import Dataset, InteractionSequence, generate_synthetic
from trustcal.model import SELECTED_STRUCTURE, TrustWorkloadModel

A_DEFAULT = ActionTuple("AR_off", "Rel_mid", "Traffic_low", "Peds_absent")


def uniform_model(structure=SELECTED_STRUCTURE) -> TrustWorkloadModel:
    return TrustWorkloadModel(
        structure=structure,
        prior_trust=[0.5, 0.5],
        prior_workload=[0.5, 0.5],
        trans_trust=np.full((structure.n_trust_actions, 2, 2, 2), 0.5),
        trans_workload=np.full((structure.n_workload_actions, 2, 2, 2), 0.5),
        emit_trust=np.full((2, 2), 0.5),
        emit_workload=np.full((2, 5), 0.2),
    )


def deterministic_model(structure=SELECTED_STRUCTURE) -> TrustWorkloadModel:
    """Point-mass everything: start (T_high, W_low), absorb there, emit
    (R_plus, G_road) from every reachable state."""
    tt = np.zeros((structure.n_trust_actions, 2, 2, 2))
    tt[..., 1] = 1.0
    tw = np.zeros((structure.n_workload_actions, 2, 2, 2))
    tw[..., 0] = 1.0
    et = np.array([[1.0, 0.0], [0.0, 1.0]])
    ew = np.zeros((2, 5))
    ew[0, 0] = 1.0
    ew[1, 2] = 1.0
    return TrustWorkloadModel(
        structure=structure,
        prior_trust=[0.0, 1.0],
        prior_workload=[1.0, 0.0],
        trans_trust=tt,
        trans_workload=tw,
        emit_trust=et,
        emit_workload=ew,
    )


def recovery_truth() -> TrustWorkloadModel:
    """Sticky, fully-mixing ground truth for parameter-recovery experiments.

    States persist for many frames (slow per-frame dynamics, as at 25 fps)
    with action-dependent equilibria kept well inside (0, 1), so every
    state-action cell stays occupied, the smoothed state posteriors are
    sharp, and all rows are identifiable from a study-sized dataset.
    """
    s = SELECTED_STRUCTURE
    tt = np.empty((s.n_trust_actions, 2, 2, 2))
    target_t = {("AR_off", "Rel_low"): 0.25, ("AR_off", "Rel_mid"): 0.45,
                ("AR_off", "Rel_high"): 0.70, ("AR_on", "Rel_low"): 0.50,
                ("AR_on", "Rel_mid"): 0.60, ("AR_on", "Rel_high"): 0.75}
    for ia, action in enumerate(s.trust_actions):
        for st in range(2):
            for sw in range(2):
                rate = 0.06 * (0.5 if sw == 1 else 1.0)
                p = (1.0 - rate) * st + rate * target_t[action]
                tt[ia, st, sw] = (1.0 - p, p)
    tw = np.empty((s.n_workload_actions, 2, 2, 2))
    for iw, action in enumerate(s.workload_actions):
        transparency, reliability, peds = action
        target = (0.25 + 0.20 * (transparency == "AR_on")
                  + 0.20 * (peds == "Peds_present")
                  + 0.05 * (reliability == "Rel_low"))
        for st in range(2):
            for sw in range(2):
                eff = min(target + 0.05 * (st == 0), 0.9)
                p = (1.0 - 0.08) * sw + 0.08 * eff
                tw[iw, st, sw] = (1.0 - p, p)
    return TrustWorkloadModel(
        structure=s,
        prior_trust=[0.45, 0.55],
        prior_workload=[0.55, 0.45],
        trans_trust=tt,
        trans_workload=tw,
        emit_trust=[[0.95, 0.05], [0.03, 0.97]],
        emit_workload=[[0.62, 0.28, 0.03, 0.03, 0.04],
                       [0.16, 0.14, 0.28, 0.20, 0.22]],
    )


def selection_truth() -> TrustWorkloadModel:
    """Traffic-free generator with strong, quickly-learned action effects.

    Used for structure-selection experiments: transparency and pedestrians
    shift the per-frame dynamics by ~0.1 probability, far above fold noise,
    while traffic density drives nothing.
    """
    s = SELECTED_STRUCTURE
    tt = np.empty((s.n_trust_actions, 2, 2, 2))
    target_t = {("AR_off", "Rel_low"): 0.10, ("AR_off", "Rel_mid"): 0.40,
                ("AR_off", "Rel_high"): 0.80, ("AR_on", "Rel_low"): 0.50,
                ("AR_on", "Rel_mid"): 0.65, ("AR_on", "Rel_high"): 0.90}
    for ia, action in enumerate(s.trust_actions):
        for st in range(2):
            for sw in range(2):
                rate = 0.25 * (0.8 if sw == 1 else 1.0)
                p = (1.0 - rate) * st + rate * target_t[action]
                tt[ia, st, sw] = (1.0 - p, p)
    tw = np.empty((s.n_workload_actions, 2, 2, 2))
    for iw, action in enumerate(s.workload_actions):
        transparency, reliability, peds = action
        target = (0.15 + 0.45 * (peds == "Peds_present")
                  + 0.30 * (transparency == "AR_on")
                  + 0.05 * (reliability == "Rel_low"))
        for st in range(2):
            for sw in range(2):
                p = 0.75 * sw + 0.25 * min(target + 0.05 * (st == 0), 0.9)
                tw[iw, st, sw] = (1.0 - p, p)
    return TrustWorkloadModel(
        structure=s,
        prior_trust=[0.4, 0.6],
        prior_workload=[0.6, 0.4],
        trans_trust=tt,
        trans_workload=tw,
        emit_trust=[[0.95, 0.05], [0.03, 0.97]],
        emit_workload=[[0.70, 0.20, 0.02, 0.03, 0.05],
                       [0.10, 0.10, 0.35, 0.25, 0.20]],
    )


def random_sequence(model, rng, n_frames, seq_id="seq") -> InteractionSequence:
    scenario = [FULL_ACTIONS[int(rng.integers(len(FULL_ACTIONS)))]
                for _ in range(n_frames)]
    return generate_synthetic(model, scenario, rng_seed=int(rng.integers(2**31)),
                              seq_id=seq_id)


def random_dataset(model, rng, n_seqs, min_frames=3, max_frames=12) -> Dataset:
    seqs = []
    for i in range(n_seqs):
        n = int(rng.integers(min_frames, max_frames + 1))
        seqs.append(random_sequence(model, rng, n, seq_id=f"seq{i}"))
    return Dataset(seqs)
