"""Action-structure search: repeated stratified CV scored by AIC.

Candidate structures are every way of assigning action dimensions to the two
factors with reliability pinned to trust (8 x 16 = 128 candidates).  Each is
scored by the average held-out log-likelihood over ``n_repeats`` seeded fold
divisions, then ranked by AIC computed on that average (the selection
procedure scores validation likelihood, not training likelihood, so the AIC
penalty is doing double duty with the held-out evaluation; both numbers are
reported).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .categories import ACTION_DIMS, DIM_LEVELS, N_GAZE, N_RELIANCE
from .data import Dataset
from .errors import StratificationImpossible
from .estimation import (
    FitConfig,
    dataset_log_likelihoods,
    multi_restart_fit,
)
from .model import ActionStructure

DIMS_SEPARATOR = "+"
EMPTY_DIMS = "-"


@dataclass(frozen=True)
class SelectionConfig:
    k_folds: int = 3
    n_repeats: int = 24
    restarts_per_fit: int = 20
    rng_seed: int = 0
    stratify_by: str = "condition"
    fit_tol: float = 1e-6
    fit_max_iter: int = 500
    n_jobs: int = 1

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")
        if self.restarts_per_fit < 1:
            raise ValueError("restarts_per_fit must be at least 1")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be at least 1")


class SequenceMetadata(NamedTuple):
    participant: str
    condition: str
    intersection: str


def parse_sequence_metadata(seq_id: str) -> SequenceMetadata:
    """Split ``<participant>_<condition>_<intersection>`` sequence ids."""
    parts = seq_id.split("_")
    if len(parts) != 3 or not all(parts):
        raise StratificationImpossible(
            f"sequence id {seq_id!r} does not follow "
            "<participant>_<condition>_<intersection>")
    return SequenceMetadata(*parts)


def enumerate_structures() -> list:
    """All candidate structures in canonical (trust mask, workload mask) order."""
    subsets = []
    for mask in range(1 << len(ACTION_DIMS)):
        subsets.append(frozenset(
            d for i, d in enumerate(ACTION_DIMS) if mask & (1 << i)))
    out = []
    for trust_dims in subsets:
        if "reliability" not in trust_dims:
            continue
        for workload_dims in subsets:
            out.append(ActionStructure(trust_dims=trust_dims,
                                       workload_dims=workload_dims))
    return out


def count_parameters(structure: ActionStructure) -> int:
    """Free parameters under the documented counting rule.

    Binary rows carry one free parameter; the two priors carry one each; the
    gaze emission rows carry ``n_gaze - 1`` each.  Transition tables hold one
    row per (joint state, reduced action).
    """
    n_trust_actions = 1
    for d in structure.trust_dim_order:
        n_trust_actions *= len(DIM_LEVELS[d])
    n_workload_actions = 1
    for d in structure.workload_dim_order:
        n_workload_actions *= len(DIM_LEVELS[d])
    return (1 + 1
            + 4 * n_trust_actions
            + 4 * n_workload_actions
            + 2 * (N_RELIANCE - 1)
            + 2 * (N_GAZE - 1))


def structure_key(structure: ActionStructure) -> tuple:
    """Canonical sort key: (trust mask, workload mask)."""
    def mask(dims):
        return sum(1 << i for i, d in enumerate(ACTION_DIMS) if d in dims)
    return mask(structure.trust_dims), mask(structure.workload_dims)


def dims_label(dims) -> str:
    ordered = [d for d in ACTION_DIMS if d in dims]
    return DIMS_SEPARATOR.join(ordered) if ordered else EMPTY_DIMS


def fold_assignments(dataset: Dataset, k_folds: int,
                     rng: np.random.Generator,
                     stratify_by: str = "condition") -> list:
    """Stratified folds: one member per (participant, grouping-key) cell.

    ``stratify_by`` names the metadata field that defines a cell alongside
    the participant (the experimental condition by default).  Every cell's
    sequence count must be divisible by ``k_folds``; each cell's sequences
    are shuffled and dealt round-robin, so every fold sees the same
    participants and conditions.
    """
    if stratify_by not in SequenceMetadata._fields:
        raise StratificationImpossible(
            f"unknown stratification key {stratify_by!r}; choose from "
            f"{SequenceMetadata._fields}")
    cells: dict = {}
    for idx, seq in enumerate(dataset.sequences):
        meta = parse_sequence_metadata(seq.id)
        cells.setdefault((meta.participant, getattr(meta, stratify_by)),
                         []).append(idx)
    folds = [[] for _ in range(k_folds)]
    for key in sorted(cells):
        members = cells[key]
        if len(members) % k_folds != 0:
            raise StratificationImpossible(
                f"cell {key} holds {len(members)} sequences, not divisible "
                f"into {k_folds} folds")
        order = rng.permutation(len(members))
        for pos, j in enumerate(order):
            folds[pos % k_folds].append(members[int(j)])
    return [sorted(f) for f in folds]


def _fit_seed(rng_seed: int, repeat: int, fold: int) -> int:
    return int(np.random.SeedSequence((rng_seed, repeat, fold))
               .generate_state(1)[0])


def cross_validate(dataset: Dataset, structure: ActionStructure,
                   config: SelectionConfig) -> float:
    """Mean held-out total log-likelihood over repeats x folds.

    Fold divisions depend only on (rng_seed, repeat), so every structure
    scored under the same config sees identical divisions (paired
    comparison).
    """
    evals = []
    for repeat in range(config.n_repeats):
        rng = np.random.default_rng(
            np.random.SeedSequence((config.rng_seed, repeat)))
        folds = fold_assignments(dataset, config.k_folds, rng,
                                 stratify_by=config.stratify_by)
        for fold_idx, val_idx in enumerate(folds):
            held_out = set(val_idx)
            train = Dataset([s for i, s in enumerate(dataset.sequences)
                             if i not in held_out])
            val = Dataset([dataset.sequences[i] for i in val_idx])
            fit_config = FitConfig(
                tol=config.fit_tol, max_iter=config.fit_max_iter,
                n_restarts=config.restarts_per_fit,
                rng_seed=_fit_seed(config.rng_seed, repeat, fold_idx),
                n_jobs=1)
            result = multi_restart_fit(train, structure, fit_config)
            evals.append(float(dataset_log_likelihoods(result.model,
                                                       val).sum()))
    return float(np.mean(evals))


@dataclass(frozen=True)
class StructureScore:
    structure: ActionStructure
    n_params: int
    avg_validation_ll: float
    aic: float


@dataclass(frozen=True)
class SelectionReport:
    rows: tuple
    chosen: ActionStructure

    def ranked(self) -> list:
        order = sorted(
            range(len(self.rows)),
            key=lambda i: (self.rows[i].aic, self.rows[i].n_params, i))
        ranks = [0] * len(self.rows)
        for rank, i in enumerate(order, start=1):
            ranks[i] = rank
        return ranks

    def to_csv(self) -> str:
        ranks = self.ranked()
        lines = ["trust_dims,workload_dims,n_params,avg_val_ll,aic,rank"]
        for row, rank in zip(self.rows, ranks):
            lines.append(",".join((
                dims_label(row.structure.trust_dims),
                dims_label(row.structure.workload_dims),
                str(row.n_params),
                repr(row.avg_validation_ll),
                repr(row.aic),
                str(rank))))
        return "\n".join(lines) + "\n"


_CV_STATE: dict = {}


def _cv_worker_init(dataset, config, structures):
    _CV_STATE["dataset"] = dataset
    _CV_STATE["config"] = config
    _CV_STATE["structures"] = structures


def _cv_worker(index: int) -> float:
    return cross_validate(_CV_STATE["dataset"], _CV_STATE["structures"][index],
                          _CV_STATE["config"])


def select_structure(dataset: Dataset,
                     config: SelectionConfig) -> SelectionReport:
    """Score all 128 candidate structures and pick the AIC minimizer.

    AIC = 2 * n_params - 2 * avg_validation_ll; ties break toward fewer
    parameters, then canonical structure order.
    """
    structures = enumerate_structures()
    indices = range(len(structures))
    if config.n_jobs > 1:
        with ProcessPoolExecutor(
                max_workers=config.n_jobs, initializer=_cv_worker_init,
                initargs=(dataset, config, structures)) as pool:
            avg_lls = list(pool.map(_cv_worker, indices, chunksize=4))
    else:
        _cv_worker_init(dataset, config, structures)
        avg_lls = [_cv_worker(i) for i in indices]
        _CV_STATE.clear()

    rows = []
    for structure, avg_ll in zip(structures, avg_lls):
        k = count_parameters(structure)
        rows.append(StructureScore(
            structure=structure, n_params=k, avg_validation_ll=avg_ll,
            aic=2.0 * k - 2.0 * avg_ll))
    best = min(range(len(rows)),
               key=lambda i: (rows[i].aic, rows[i].n_params, i))
    return SelectionReport(rows=tuple(rows), chosen=rows[best].structure)
