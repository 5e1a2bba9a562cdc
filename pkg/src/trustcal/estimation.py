"""Maximum-likelihood fitting of the trust-workload model.

The E-step runs a scaled forward-backward pass over the 4-state joint chain
whose step-t transition matrix is action-dependent; the M-step renormalizes
expected counts per factor.  :func:`forward_backward` is the plain
per-sequence reference; fitting goes through a batched engine that pads
sequences to a common length and vectorizes across them (identical
arithmetic per sequence, checked against the reference in tests).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .categories import (
    FULL_ACTIONS,
    N_GAZE,
    N_JOINT_STATES,
    N_RELIANCE,
    N_TRUST,
    N_WORKLOAD,
    full_action_index,
    gaze_index,
    reliance_index,
)
from .data import Dataset
from .errors import AllRestartsFailed, EmptyDataset, ZeroLikelihood
from .model import (
    ActionStructure,
    StateLabeling,
    TrustWorkloadModel,
    label_states,
    random_model,
)


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-6
    max_iter: int = 500
    n_restarts: int = 1000
    rng_seed: int = 0
    prob_floor: float = 0.0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        if self.prob_floor < 0 or self.prob_floor >= 0.5:
            raise ValueError("prob_floor must lie in [0, 0.5)")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be at least 1")


@dataclass
class FitResult:
    model: TrustWorkloadModel
    total_log_likelihood: float
    ll_trajectory: list
    restart_index: int = 0
    labeling: StateLabeling | None = None
    restart_log_likelihoods: list | None = None


def forward_backward(model: TrustWorkloadModel, seq):
    """Smoothed posteriors for one sequence.

    Returns ``(gamma, xi, log_likelihood)`` where ``gamma[t]`` is the
    posterior over the 4 joint states at frame t and ``xi[t]`` the posterior
    over (state at t, state at t+1) pairs; each sums to 1.
    """
    steps = seq.steps
    n = len(steps)
    emis = np.stack([model.emission_vector(s.observation) for s in steps])
    trans = np.stack([model.transition_matrix(s.action) for s in steps[1:]]) \
        if n > 1 else np.empty((0, N_JOINT_STATES, N_JOINT_STATES))

    alpha = np.empty((n, N_JOINT_STATES))
    scale = np.empty(n)
    a = model.joint_prior * emis[0]
    for t in range(n):
        if t > 0:
            a = (alpha[t - 1] @ trans[t - 1]) * emis[t]
        scale[t] = a.sum()
        if scale[t] <= 0.0:
            raise ZeroLikelihood(
                f"sequence {seq.id!r} impossible under the model at frame "
                f"{steps[t].t}")
        alpha[t] = a / scale[t]

    beta = np.ones(N_JOINT_STATES)
    gamma = np.empty_like(alpha)
    xi = np.empty((n - 1, N_JOINT_STATES, N_JOINT_STATES))
    gamma[n - 1] = alpha[n - 1]
    for t in range(n - 2, -1, -1):
        eb = emis[t + 1] * beta / scale[t + 1]
        xi[t] = alpha[t][:, None] * trans[t] * eb[None, :]
        beta = trans[t] @ eb
        gamma[t] = alpha[t] * beta
    return gamma, xi, float(np.log(scale).sum())


# -- batched engine ----------------------------------------------------------

class _Params(NamedTuple):
    pi_t: np.ndarray
    pi_w: np.ndarray
    tt: np.ndarray
    tw: np.ndarray
    et: np.ndarray
    ew: np.ndarray

    @classmethod
    def from_model(cls, model: TrustWorkloadModel) -> "_Params":
        return cls(model.prior_trust.copy(), model.prior_workload.copy(),
                   model.trans_trust.copy(), model.trans_workload.copy(),
                   model.emit_trust.copy(), model.emit_workload.copy())

    def to_model(self, structure: ActionStructure) -> TrustWorkloadModel:
        return TrustWorkloadModel(structure, self.pi_t, self.pi_w, self.tt,
                                  self.tw, self.et, self.ew)


class _Stats(NamedTuple):
    prior: np.ndarray    # (S, 4) first-frame posteriors
    trans_t: np.ndarray  # (At, trust, workload, trust')
    trans_w: np.ndarray  # (Aw, trust, workload, workload')
    emit_t: np.ndarray   # (trust, reliance)
    emit_w: np.ndarray   # (workload, gaze)


class _CompiledDataset:
    """Index arrays for a dataset, padded to the longest sequence."""

    def __init__(self, dataset: Dataset):
        seqs = dataset.sequences
        if not seqs:
            raise EmptyDataset("dataset has no sequences")
        self.seq_ids = [s.id for s in seqs]
        self.lengths = np.array([len(s) for s in seqs], dtype=np.int64)
        n_seq = len(seqs)
        t_max = int(self.lengths.max())
        self.action = np.zeros((t_max, n_seq), dtype=np.int64)
        self.rel = np.zeros((t_max, n_seq), dtype=np.int64)
        self.gaze = np.zeros((t_max, n_seq), dtype=np.int64)
        for s, seq in enumerate(seqs):
            for t, step in enumerate(seq.steps):
                self.action[t, s] = full_action_index(step.action)
                self.rel[t, s] = reliance_index(step.observation.reliance)
                self.gaze[t, s] = gaze_index(step.observation.gaze)
        self.valid = np.arange(t_max)[:, None] < self.lengths[None, :]

    def bind(self, structure: ActionStructure) -> "_CompiledBatch":
        return _CompiledBatch(self, structure)


class _CompiledBatch:
    """A compiled dataset specialized to one action structure."""

    def __init__(self, compiled: _CompiledDataset, structure: ActionStructure):
        self.data = compiled
        self.structure = structure
        to_trust = np.array([structure.trust_action_index(a)
                             for a in FULL_ACTIONS], dtype=np.int64)
        to_workload = np.array([structure.workload_action_index(a)
                                for a in FULL_ACTIONS], dtype=np.int64)
        self.at = to_trust[compiled.action]
        self.aw = to_workload[compiled.action]
        n_at = structure.n_trust_actions
        n_aw = structure.n_workload_actions
        # transition t-1 -> t is attributed to the action at frame t
        tvalid = compiled.valid[1:]
        self.trans_mask_t = (
            (self.at[None, 1:, :] == np.arange(n_at)[:, None, None])
            & tvalid[None]).astype(np.float64)
        self.trans_mask_w = (
            (self.aw[None, 1:, :] == np.arange(n_aw)[:, None, None])
            & tvalid[None]).astype(np.float64)
        self.rel_mask = (
            (compiled.rel[None] == np.arange(N_RELIANCE)[:, None, None])
            & compiled.valid[None]).astype(np.float64)
        self.gaze_mask = (
            (compiled.gaze[None] == np.arange(N_GAZE)[:, None, None])
            & compiled.valid[None]).astype(np.float64)


def _emission_probs(batch: _CompiledBatch, params: _Params) -> np.ndarray:
    d = batch.data
    e_t = params.et[:, d.rel]    # (trust, T, S)
    e_w = params.ew[:, d.gaze]   # (workload, T, S)
    e = np.einsum("ats,bts->tsab", e_t, e_w)
    e = e.reshape(d.rel.shape + (N_JOINT_STATES,))
    e[~d.valid] = 1.0            # padded frames contribute nothing
    return e


def _transition_matrices(batch: _CompiledBatch, params: _Params) -> np.ndarray:
    d = batch.data
    tt = params.tt[batch.at[1:]]  # (T-1, S, trust, workload, trust')
    tw = params.tw[batch.aw[1:]]  # (T-1, S, trust, workload, workload')
    m = np.einsum("tsabc,tsabd->tsabcd", tt, tw)
    m = m.reshape(tt.shape[:2] + (N_JOINT_STATES, N_JOINT_STATES))
    m[~d.valid[1:]] = np.eye(N_JOINT_STATES)
    return m


def _forward(batch: _CompiledBatch, params: _Params, emis: np.ndarray,
             trans: np.ndarray, allow_zero: bool = False):
    d = batch.data
    t_max, n_seq = d.rel.shape
    alpha = np.empty((t_max, n_seq, N_JOINT_STATES))
    scale = np.empty((t_max, n_seq))
    prior = np.outer(params.pi_t, params.pi_w).reshape(N_JOINT_STATES)
    impossible = np.zeros(n_seq, dtype=bool)
    a = prior[None, :] * emis[0]
    for t in range(t_max):
        if t > 0:
            a = np.einsum("si,sij->sj", alpha[t - 1], trans[t - 1]) * emis[t]
        s = a.sum(axis=-1)
        dead = (s <= 0.0) & d.valid[t]
        if np.any(dead):
            if not allow_zero:
                bad = [d.seq_ids[i] for i in np.nonzero(dead)[0][:5]]
                raise ZeroLikelihood(
                    f"sequences impossible under the model: {bad}")
            impossible |= dead
            a = np.where(dead[:, None], 1.0, a)
            s = np.where(dead, N_JOINT_STATES, s)
        scale[t] = s
        alpha[t] = a / s[:, None]
    return alpha, scale, impossible


def _e_step(batch: _CompiledBatch, params: _Params):
    """One scaled forward-backward sweep; returns (stats, total_ll)."""
    d = batch.data
    t_max, n_seq = d.rel.shape
    emis = _emission_probs(batch, params)
    trans = _transition_matrices(batch, params)
    alpha, scale, _ = _forward(batch, params, emis, trans)
    total_ll = float(np.log(scale).sum())

    gamma = np.empty_like(alpha)
    beta = np.ones((n_seq, N_JOINT_STATES))
    gamma[t_max - 1] = alpha[t_max - 1]
    # xi contributions are accumulated in-place into the `trans` buffer
    for t in range(t_max - 2, -1, -1):
        eb = emis[t + 1] * beta / scale[t + 1][:, None]
        beta = np.einsum("sij,sj->si", trans[t], eb)
        trans[t] *= alpha[t][:, :, None]
        trans[t] *= eb[:, None, :]
        gamma[t] = alpha[t] * beta

    xi_t = np.einsum("ats,tsij->aij", batch.trans_mask_t, trans)
    xi_w = np.einsum("ats,tsij->aij", batch.trans_mask_w, trans)
    xi_t = xi_t.reshape(-1, N_TRUST, N_WORKLOAD, N_TRUST, N_WORKLOAD).sum(-1)
    xi_w = xi_w.reshape(-1, N_TRUST, N_WORKLOAD, N_TRUST, N_WORKLOAD).sum(-2)

    em_t = np.einsum("ots,tsj->oj", batch.rel_mask, gamma)
    em_t = em_t.reshape(N_RELIANCE, N_TRUST, N_WORKLOAD).sum(-1).T
    em_w = np.einsum("ots,tsj->oj", batch.gaze_mask, gamma)
    em_w = em_w.reshape(N_GAZE, N_TRUST, N_WORKLOAD).sum(1).T

    return _Stats(gamma[0], xi_t, xi_w, em_t, em_w), total_ll


def _log_likelihoods(batch: _CompiledBatch, params: _Params) -> np.ndarray:
    """Per-sequence log-likelihoods; -inf marks impossible sequences."""
    emis = _emission_probs(batch, params)
    trans = _transition_matrices(batch, params)
    _, scale, impossible = _forward(batch, params, emis, trans,
                                    allow_zero=True)
    lls = np.log(scale).sum(axis=0)
    lls[impossible] = -np.inf
    return lls


def _normalized_rows(numer: np.ndarray, old: np.ndarray,
                     prob_floor: float) -> np.ndarray:
    # rows with zero expected count keep their previous value
    denom = numer.sum(axis=-1, keepdims=True)
    safe = np.where(denom > 0.0, denom, 1.0)
    rows = np.where(denom > 0.0, numer / safe, old)
    if prob_floor > 0.0:
        rows = np.maximum(rows, prob_floor)
        rows = rows / rows.sum(axis=-1, keepdims=True)
    return rows


def _m_step(batch: _CompiledBatch, stats: _Stats, params: _Params,
            prob_floor: float) -> _Params:
    first = stats.prior.sum(axis=0).reshape(N_TRUST, N_WORKLOAD)
    pi_t = first.sum(axis=1)
    pi_w = first.sum(axis=0)
    return _Params(
        pi_t=pi_t / pi_t.sum(),
        pi_w=pi_w / pi_w.sum(),
        tt=_normalized_rows(stats.trans_t, params.tt, prob_floor),
        tw=_normalized_rows(stats.trans_w, params.tw, prob_floor),
        et=_normalized_rows(stats.emit_t, params.et, prob_floor),
        ew=_normalized_rows(stats.emit_w, params.ew, prob_floor),
    )


def em_fit(dataset: Dataset, structure: ActionStructure,
           init: TrustWorkloadModel, config: FitConfig,
           restart_index: int = 0) -> FitResult:
    """Run EM to convergence from one initial model.

    Stops when the log-likelihood improves by less than ``config.tol`` or
    ``config.max_iter`` updates have been applied; the reported likelihood
    is always that of the returned (labeled) model.
    """
    if init.structure != structure:
        raise ValueError("init model structure does not match the requested "
                         "structure")
    batch = _CompiledDataset(dataset).bind(structure)
    return _em_fit_batch(batch, init, config, restart_index)


def _em_fit_batch(batch: _CompiledBatch, init: TrustWorkloadModel,
                  config: FitConfig, restart_index: int) -> FitResult:
    params = _Params.from_model(init)
    trajectory = []
    ll_prev = -math.inf
    for _ in range(config.max_iter):
        stats, ll = _e_step(batch, params)
        trajectory.append(ll)
        if ll - ll_prev < config.tol:
            break
        ll_prev = ll
        params = _m_step(batch, stats, params, config.prob_floor)
    else:
        # max_iter updates applied; score the final parameters too
        trajectory.append(float(_log_likelihoods(batch, params).sum()))

    model = params.to_model(batch.structure)
    labeled, labeling = label_states(model)
    return FitResult(model=labeled, total_log_likelihood=trajectory[-1],
                     ll_trajectory=trajectory, restart_index=restart_index,
                     labeling=labeling)


def restart_init(structure: ActionStructure, rng_seed: int,
                 restart_index: int) -> TrustWorkloadModel:
    """The deterministic flat-Dirichlet initial model of one restart."""
    rng = np.random.default_rng([rng_seed, restart_index])
    return random_model(structure, rng)


_WORKER_STATE: dict = {}


def _restart_worker_init(dataset, structure, config):
    _WORKER_STATE["batch"] = _CompiledDataset(dataset).bind(structure)
    _WORKER_STATE["structure"] = structure
    _WORKER_STATE["config"] = config


def _run_restart(index: int):
    batch = _WORKER_STATE["batch"]
    structure = _WORKER_STATE["structure"]
    config = _WORKER_STATE["config"]
    init = restart_init(structure, config.rng_seed, index)
    try:
        return index, _em_fit_batch(batch, init, config, index), None
    except ZeroLikelihood as exc:
        return index, None, str(exc)


def multi_restart_fit(dataset: Dataset, structure: ActionStructure,
                      config: FitConfig) -> FitResult:
    """Best-of-N EM fit from seeded flat-Dirichlet initializations.

    Restart ``i`` always starts from ``restart_init(structure, seed, i)``,
    so results are reproducible and independent of ``n_jobs``; ties in final
    log-likelihood resolve to the smaller restart index.
    """
    if not dataset.sequences:
        raise EmptyDataset("dataset has no sequences")
    indices = range(config.n_restarts)
    if config.n_jobs > 1 and config.n_restarts > 1:
        with ProcessPoolExecutor(
                max_workers=min(config.n_jobs, config.n_restarts),
                initializer=_restart_worker_init,
                initargs=(dataset, structure, config)) as pool:
            outcomes = list(pool.map(_run_restart, indices, chunksize=4))
    else:
        _restart_worker_init(dataset, structure, config)
        outcomes = [_run_restart(i) for i in indices]
        _WORKER_STATE.clear()

    outcomes.sort(key=lambda o: o[0])
    restart_lls = [o[1].total_log_likelihood if o[1] is not None else math.nan
                   for o in outcomes]
    best = None
    for _, result, _err in outcomes:
        if result is None:
            continue
        if best is None or result.total_log_likelihood > best.total_log_likelihood:
            best = result
    if best is None:
        first_error = next(err for _, r, err in outcomes if r is None)
        raise AllRestartsFailed(
            f"all {config.n_restarts} restarts failed; first error: "
            f"{first_error}")
    best.restart_log_likelihoods = restart_lls
    return best


def dataset_log_likelihoods(model: TrustWorkloadModel,
                            dataset: Dataset) -> np.ndarray:
    """Per-sequence log-likelihoods of a dataset under a fixed model."""
    batch = _CompiledDataset(dataset).bind(model.structure)
    return _log_likelihoods(batch, _Params.from_model(model))


def dataset_log_likelihood(model: TrustWorkloadModel,
                           dataset: Dataset) -> float:
    return float(dataset_log_likelihoods(model, dataset).sum())
