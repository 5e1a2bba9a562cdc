import numpy as np
import pytest

from conftest import recovery_truth
from trustcal.data import Dataset, synthetic_study_dataset
from trustcal.errors import StratificationImpossible
from trustcal.estimation import (
    FitConfig,
    dataset_log_likelihood,
    em_fit,
    multi_restart_fit,
)
from trustcal.model import ActionStructure, SELECTED_STRUCTURE, TrustWorkloadModel
from trustcal.selection import (
    SelectionConfig,
    SelectionReport,
    StructureScore,
    count_parameters,
    cross_validate,
    dims_label,
    enumerate_structures,
    fold_assignments,
    parse_sequence_metadata,
    select_structure,
)

FAST_CV = dict(n_repeats=1, restarts_per_fit=1, fit_tol=1e-3, fit_max_iter=15)


class TestEnumerateStructures:
    def test_count_is_128(self):
        assert len(enumerate_structures()) == 128

    def test_reliability_always_drives_trust(self):
        assert all("reliability" in s.trust_dims for s in enumerate_structures())

    def test_contains_selected_structure(self):
        assert SELECTED_STRUCTURE in enumerate_structures()

    def test_no_duplicates(self):
        structures = enumerate_structures()
        assert len(set(structures)) == len(structures)


class TestCountParameters:
    def test_selected_structure_has_84(self):
        assert count_parameters(SELECTED_STRUCTURE) == 84

    def test_minimal_structure_has_28(self):
        s = ActionStructure(trust_dims={"reliability"}, workload_dims=set())
        assert count_parameters(s) == 28

    def test_full_structure_has_204(self):
        s = ActionStructure(trust_dims=set(ACTION_DIMS_ALL),
                            workload_dims=set(ACTION_DIMS_ALL))
        assert count_parameters(s) == 204


ACTION_DIMS_ALL = ("transparency", "reliability", "traffic", "pedestrians")


class TestFolds:
    def test_metadata_parsing(self):
        meta = parse_sequence_metadata("p03_c5_i2")
        assert meta == ("p03", "c5", "i2")
        with pytest.raises(StratificationImpossible):
            parse_sequence_metadata("nometadata")

    def test_one_intersection_per_cell_per_fold(self):
        ds = synthetic_study_dataset(recovery_truth(), n_participants=2,
                                     frames_per_sequence=4, rng_seed=0)
        rng = np.random.default_rng(1)
        folds = fold_assignments(ds, 3, rng)
        assert sorted(i for f in folds for i in f) == list(range(len(ds)))
        for fold in folds:
            cells = [parse_sequence_metadata(ds.sequences[i].id)[:2]
                     for i in fold]
            assert len(cells) == len(set(cells))  # one per cell

    def test_indivisible_cells_rejected(self):
        ds = synthetic_study_dataset(recovery_truth(), n_participants=1,
                                     frames_per_sequence=4, rng_seed=0)
        with pytest.raises(StratificationImpossible, match="divisible"):
            fold_assignments(ds, 2, np.random.default_rng(0))

    def test_alternate_stratification_key(self):
        # grouping by intersection instead: cells hold the 8 conditions,
        # which split into 4 folds but not 3
        ds = synthetic_study_dataset(recovery_truth(), n_participants=1,
                                     frames_per_sequence=4, rng_seed=0)
        folds = fold_assignments(ds, 4, np.random.default_rng(0),
                                 stratify_by="intersection")
        assert sorted(i for f in folds for i in f) == list(range(len(ds)))
        with pytest.raises(StratificationImpossible, match="divisible"):
            fold_assignments(ds, 3, np.random.default_rng(0),
                             stratify_by="intersection")
        with pytest.raises(StratificationImpossible, match="unknown"):
            fold_assignments(ds, 3, np.random.default_rng(0),
                             stratify_by="drive")


class TestCrossValidate:
    def _dataset(self, frames=30):
        return synthetic_study_dataset(recovery_truth(), n_participants=2,
                                       frames_per_sequence=frames, rng_seed=5)

    def test_deterministic_given_seed(self):
        ds = self._dataset()
        cfg = SelectionConfig(rng_seed=9, n_repeats=2, restarts_per_fit=1,
                              fit_tol=1e-3, fit_max_iter=10)
        assert cross_validate(ds, SELECTED_STRUCTURE, cfg) == \
            cross_validate(ds, SELECTED_STRUCTURE, cfg)

    def test_validation_tracks_training_for_well_specified_model(self):
        # data generated by the model family, sized so parameter noise is
        # negligible: per-sequence validation LL sits inside a 3-sigma
        # bootstrap band of per-sequence training LL
        ds = synthetic_study_dataset(recovery_truth(), n_participants=4,
                                     frames_per_sequence=150, rng_seed=5)
        cfg = SelectionConfig(rng_seed=3, n_repeats=2, restarts_per_fit=2,
                              fit_tol=1e-4, fit_max_iter=80)
        avg_val_total = cross_validate(ds, SELECTED_STRUCTURE, cfg)
        val_per_seq = avg_val_total / (len(ds) / cfg.k_folds)

        fit = multi_restart_fit(ds, SELECTED_STRUCTURE,
                                FitConfig(tol=1e-4, max_iter=80, n_restarts=2,
                                          rng_seed=3))
        from trustcal.estimation import dataset_log_likelihoods
        train_lls = dataset_log_likelihoods(fit.model, ds)
        rng = np.random.default_rng(0)
        boots = [np.mean(rng.choice(train_lls, size=len(train_lls)))
                 for _ in range(500)]
        sigma = float(np.std(boots))
        assert abs(val_per_seq - float(np.mean(train_lls))) < 3 * sigma

    def test_structure_missing_a_strong_effect_scores_worse(self):
        # generator with a strong traffic effect on trust: the structure that
        # drops traffic from trust loses held-out likelihood on ~1e4 frames
        truth_structure = ActionStructure(
            trust_dims={"reliability", "traffic"},
            workload_dims={"pedestrians"})
        tt = np.empty((truth_structure.n_trust_actions, 2, 2, 2))
        for ia, (rel, traffic) in enumerate(truth_structure.trust_actions):
            target = 0.85 if traffic == "Traffic_high" else 0.15
            target += 0.05 * (rel == "Rel_high")
            for st in range(2):
                for sw in range(2):
                    p = 0.6 * st + 0.4 * min(target, 0.95)
                    tt[ia, st, sw] = (1 - p, p)
        tw = np.empty((2, 2, 2, 2))
        for iw, (peds,) in enumerate(truth_structure.workload_actions):
            for st in range(2):
                for sw in range(2):
                    p = 0.7 * sw + 0.3 * (0.8 if peds == "Peds_present" else 0.2)
                    tw[iw, st, sw] = (1 - p, p)
        truth = TrustWorkloadModel(
            structure=truth_structure, prior_trust=[0.5, 0.5],
            prior_workload=[0.5, 0.5], trans_trust=tt, trans_workload=tw,
            emit_trust=[[0.9, 0.1], [0.1, 0.9]],
            emit_workload=[[0.6, 0.25, 0.05, 0.05, 0.05],
                           [0.15, 0.15, 0.3, 0.2, 0.2]])
        ds = synthetic_study_dataset(truth, n_participants=3,
                                     frames_per_sequence=140, rng_seed=4)
        cfg = SelectionConfig(rng_seed=2, n_repeats=1, restarts_per_fit=2,
                              fit_tol=1e-4, fit_max_iter=80)
        with_traffic = cross_validate(ds, truth_structure, cfg)
        without = cross_validate(
            ds, ActionStructure(trust_dims={"reliability"},
                                workload_dims={"pedestrians"}), cfg)
        assert without < with_traffic


class TestSupersetExpressiveness:
    def test_training_ll_never_drops_when_adding_a_dimension(self):
        # embed the subset solution into the superset structure (replicate
        # rows across the added dimension) and let EM continue: training
        # likelihood must not decrease
        ds = synthetic_study_dataset(recovery_truth(), n_participants=2,
                                     frames_per_sequence=40, rng_seed=8)
        subset = ActionStructure(trust_dims={"reliability"},
                                 workload_dims={"pedestrians"})
        superset = ActionStructure(trust_dims={"reliability", "transparency"},
                                   workload_dims={"pedestrians"})
        sub_fit = multi_restart_fit(ds, subset,
                                    FitConfig(tol=1e-6, max_iter=80,
                                              n_restarts=3, rng_seed=1))
        sub_ll = sub_fit.total_log_likelihood

        m = sub_fit.model
        # subset trust actions are (reliability,); superset are
        # (transparency, reliability) -> copy the reliability row for both
        # transparency values
        tt = np.empty((superset.n_trust_actions, 2, 2, 2))
        for i, action in enumerate(superset.trust_actions):
            j = subset.trust_actions.index((action[1],))
            tt[i] = m.trans_trust[j]
        embedded = TrustWorkloadModel(
            structure=superset, prior_trust=m.prior_trust,
            prior_workload=m.prior_workload, trans_trust=tt,
            trans_workload=m.trans_workload, emit_trust=m.emit_trust,
            emit_workload=m.emit_workload)
        assert abs(dataset_log_likelihood(embedded, ds) - sub_ll) < 1e-6
        sup_fit = em_fit(ds, superset, embedded,
                         FitConfig(tol=1e-6, max_iter=80, n_restarts=1))
        assert sup_fit.total_log_likelihood >= sub_ll - 1e-6


class TestSelectStructure:
    def test_report_covers_all_structures_once(self):
        ds = synthetic_study_dataset(recovery_truth(), n_participants=1,
                                     frames_per_sequence=8, rng_seed=1)
        cfg = SelectionConfig(rng_seed=0, n_jobs=2, **FAST_CV)
        report = select_structure(ds, cfg)
        assert len(report.rows) == 128
        assert len({r.structure for r in report.rows}) == 128
        aics = [r.aic for r in report.rows]
        chosen_row = min(
            range(128), key=lambda i: (aics[i], report.rows[i].n_params, i))
        assert report.chosen == report.rows[chosen_row].structure

    def test_aic_formula(self):
        assert 2 * 84 - 2 * (-1000.0) == 2168.0

    def test_tie_breaks_to_fewer_parameters(self):
        s_small = ActionStructure(trust_dims={"reliability"}, workload_dims=set())
        s_big = SELECTED_STRUCTURE
        rows = (StructureScore(s_big, 84, -100.0, 2 * 84 + 200.0),
                StructureScore(s_small, 28, -156.0, 2 * 28 + 312.0))
        # equal AIC: 368.0 both
        assert rows[0].aic == rows[1].aic
        best = min(range(2), key=lambda i: (rows[i].aic, rows[i].n_params, i))
        assert rows[best].structure == s_small

    def test_csv_format(self):
        ds = synthetic_study_dataset(recovery_truth(), n_participants=1,
                                     frames_per_sequence=8, rng_seed=1)
        cfg = SelectionConfig(rng_seed=0, n_jobs=2, **FAST_CV)
        report = select_structure(ds, cfg)
        csv_text = report.to_csv()
        lines = csv_text.strip().split("\n")
        assert lines[0] == "trust_dims,workload_dims,n_params,avg_val_ll,aic,rank"
        assert len(lines) == 129
        ranks = sorted(int(line.split(",")[-1]) for line in lines[1:])
        assert ranks == list(range(1, 129))
        assert any(line.split(",")[1] == "-" for line in lines[1:])

    def test_dims_label(self):
        assert dims_label({"reliability", "transparency"}) == \
            "transparency+reliability"
        assert dims_label(set()) == "-"
