import math

import numpy as np
import pytest

import oracles
from conftest import A_DEFAULT, deterministic_model, random_dataset, random_sequence, uniform_model
from trustcal.categories import (
    CONTEXTS,
    FULL_ACTIONS,
    JOINT_STATES,
    ActionTuple,
    JointState,
    ObservationTuple,
    joint_state_index,
)
from trustcal.data import InteractionSequence, Step, generate_synthetic
from trustcal.errors import AmbiguousLabel, EmptySequence, ZeroLikelihood
from trustcal.model import (
    FULL_STRUCTURE,
    SELECTED_STRUCTURE,
    ActionStructure,
    TrustWorkloadModel,
    belief_update,
    emission_entropy,
    forward_filter,
    joint_emission,
    joint_transition,
    label_states,
    random_model,
    reduce_action,
    sequence_log_likelihood,
)


def test_canonical_enumerations():
    assert JOINT_STATES == (
        JointState("T_low", "W_low"), JointState("T_low", "W_high"),
        JointState("T_high", "W_low"), JointState("T_high", "W_high"))
    assert len(FULL_ACTIONS) == 24
    assert len(CONTEXTS) == 12
    assert joint_state_index(JointState("T_high", "W_low")) == 2


class TestActionStructure:
    def test_trust_requires_reliability(self):
        with pytest.raises(ValueError, match="reliability"):
            ActionStructure(trust_dims={"transparency"}, workload_dims=set())

    def test_unknown_dimension_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            ActionStructure(trust_dims={"reliability", "speed"},
                            workload_dims=set())

    def test_empty_workload_dims_is_single_action(self):
        s = ActionStructure(trust_dims={"reliability"}, workload_dims=set())
        assert s.workload_actions == ((),)
        assert s.n_workload_actions == 1

    def test_selected_structure(self):
        assert SELECTED_STRUCTURE.trust_dim_order == ("transparency", "reliability")
        assert SELECTED_STRUCTURE.workload_dim_order == (
            "transparency", "reliability", "pedestrians")
        assert SELECTED_STRUCTURE.n_trust_actions == 6
        assert SELECTED_STRUCTURE.n_workload_actions == 12


class TestReduceAction:
    def test_trust_projection(self):
        a = ActionTuple("AR_on", "Rel_low", "Traffic_high", "Peds_present")
        assert reduce_action(SELECTED_STRUCTURE, a, "trust") == ("AR_on", "Rel_low")

    def test_full_structure_is_identity(self):
        for a in FULL_ACTIONS:
            assert reduce_action(FULL_STRUCTURE, a, "workload") == tuple(a)

    def test_workload_projection(self):
        s = ActionStructure(
            trust_dims={"reliability"},
            workload_dims={"reliability", "transparency", "pedestrians"})
        a = ActionTuple("AR_off", "Rel_mid", "Traffic_low", "Peds_absent")
        assert reduce_action(s, a, "workload") == ("AR_off", "Rel_mid", "Peds_absent")

    def test_unknown_factor(self):
        with pytest.raises(ValueError):
            reduce_action(SELECTED_STRUCTURE, A_DEFAULT, "gaze")


def _single_action_model(trust_row, workload_row):
    """Model whose every transition row equals the given factor rows."""
    s = SELECTED_STRUCTURE
    tt = np.tile(np.asarray(trust_row, float), (s.n_trust_actions, 2, 2, 1))
    tw = np.tile(np.asarray(workload_row, float), (s.n_workload_actions, 2, 2, 1))
    return TrustWorkloadModel(
        structure=s, prior_trust=[0.5, 0.5], prior_workload=[0.5, 0.5],
        trans_trust=tt, trans_workload=tw,
        emit_trust=np.full((2, 2), 0.5), emit_workload=np.full((2, 5), 0.2))


class TestJointTransition:
    def test_point_masses(self):
        m = deterministic_model()
        out = joint_transition(m, JointState("T_low", "W_high"), A_DEFAULT)
        np.testing.assert_array_equal(out, [0.0, 0.0, 1.0, 0.0])

    def test_uniform_rows(self):
        m = _single_action_model([0.5, 0.5], [0.5, 0.5])
        out = joint_transition(m, JointState("T_low", "W_low"), A_DEFAULT)
        np.testing.assert_allclose(out, 0.25)

    def test_outer_product_values(self):
        # hand-multiplied: (0.3,0.7) x (0.2,0.8)
        m = _single_action_model([0.3, 0.7], [0.2, 0.8])
        out = joint_transition(m, JointState("T_high", "W_high"), A_DEFAULT)
        np.testing.assert_allclose(out, [0.06, 0.24, 0.14, 0.56], atol=1e-15)

    def test_rows_sum_to_one_and_factorize(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            m = random_model(SELECTED_STRUCTURE, rng)
            a = FULL_ACTIONS[int(rng.integers(24))]
            for s in JOINT_STATES:
                row = joint_transition(m, s, a)
                assert abs(row.sum() - 1.0) < 1e-9
                expected = oracles.state_transition(m, a)[joint_state_index(s)]
                np.testing.assert_allclose(row, expected, atol=1e-15)


class TestJointEmission:
    def test_certain(self):
        m = deterministic_model()
        o = ObservationTuple("R_plus", "G_road")
        assert joint_emission(m, JointState("T_high", "W_low"), o) == 1.0

    def test_zero_factor_annihilates(self):
        m = deterministic_model()
        o = ObservationTuple("R_minus", "G_road")
        assert joint_emission(m, JointState("T_high", "W_low"), o) == 0.0

    def test_hand_product(self):
        m = TrustWorkloadModel(
            structure=SELECTED_STRUCTURE,
            prior_trust=[0.5, 0.5], prior_workload=[0.5, 0.5],
            trans_trust=np.full((6, 2, 2, 2), 0.5),
            trans_workload=np.full((12, 2, 2, 2), 0.5),
            emit_trust=[[0.5, 0.5], [0.1, 0.9]],
            emit_workload=[[0.2] * 5, [0.4, 0.2, 0.2, 0.1, 0.1]])
        o = ObservationTuple("R_plus", "G_ped")
        got = joint_emission(m, JointState("T_high", "W_high"), o)
        assert abs(got - 0.9 * 0.2) < 1e-15


class TestBeliefUpdate:
    def test_uninformative_update_keeps_uniform(self):
        m = uniform_model()
        b = np.full(4, 0.25)
        out = belief_update(m, b, A_DEFAULT, ObservationTuple("R_plus", "G_oth"))
        np.testing.assert_allclose(out, 0.25, atol=1e-15)

    def test_consistent_evidence_keeps_point_mass(self):
        # identity transitions, deterministic emissions
        s = SELECTED_STRUCTURE
        tt = np.zeros((6, 2, 2, 2))
        tw = np.zeros((12, 2, 2, 2))
        for i in range(2):
            tt[:, i, :, i] = 1.0
            tw[:, :, i, i] = 1.0
        m = TrustWorkloadModel(
            structure=s, prior_trust=[0.0, 1.0], prior_workload=[1.0, 0.0],
            trans_trust=tt, trans_workload=tw,
            emit_trust=[[1.0, 0.0], [0.0, 1.0]],
            emit_workload=[[1, 0, 0, 0, 0], [0, 0, 1, 0, 0]])
        b = np.array([0.0, 0.0, 1.0, 0.0])
        out = belief_update(m, b, A_DEFAULT, ObservationTuple("R_plus", "G_road"))
        np.testing.assert_array_equal(out, b)

    def test_two_step_update_matches_path_enumeration(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            m = random_model(SELECTED_STRUCTURE, rng)
            seq = random_sequence(m, rng, 3, seq_id=f"s{trial}")
            beliefs = forward_filter(m, seq)
            expected = oracles.path_sum_filtered(m, seq, 2)
            np.testing.assert_allclose(beliefs[2], expected, atol=1e-12)

    def test_zero_likelihood_raises(self):
        m = deterministic_model()
        b = np.array([0.0, 0.0, 1.0, 0.0])
        with pytest.raises(ZeroLikelihood):
            belief_update(m, b, A_DEFAULT, ObservationTuple("R_minus", "G_road"))

    def test_emission_scale_invariance(self):
        # scaling the emission column of the observed tuple by c > 0 does not
        # move the posterior
        rng = np.random.default_rng(3)
        m = random_model(SELECTED_STRUCTURE, rng)
        b = rng.dirichlet(np.ones(4))
        a = FULL_ACTIONS[5]
        o = ObservationTuple("R_plus", "G_side")
        out = belief_update(m, b, a, o)
        for c in (0.01, 3.0, 250.0):
            scaled = (b @ m.transition_matrix(a)) * (c * m.emission_vector(o))
            np.testing.assert_allclose(scaled / scaled.sum(), out, atol=1e-12)


class TestSequenceLogLikelihood:
    def test_length_one_is_prior_emission(self):
        rng = np.random.default_rng(21)
        m = random_model(SELECTED_STRUCTURE, rng)
        o = ObservationTuple("R_minus", "G_vehi")
        seq = InteractionSequence("one", [Step(0, A_DEFAULT, o)])
        expected = math.log(float(m.joint_prior @ m.emission_vector(o)))
        assert abs(sequence_log_likelihood(m, seq) - expected) < 1e-12

    def test_deterministic_consistent_data_gives_zero(self):
        m = deterministic_model()
        seq = generate_synthetic(m, [A_DEFAULT] * 10, rng_seed=0)
        assert sequence_log_likelihood(m, seq) == 0.0

    def test_matches_exhaustive_path_sum(self):
        rng = np.random.default_rng(5)
        for trial in range(15):
            m = random_model(SELECTED_STRUCTURE, rng)
            n = int(rng.integers(1, 9))
            seq = random_sequence(m, rng, n, seq_id=f"s{trial}")
            ll = sequence_log_likelihood(m, seq)
            expected = math.log(oracles.path_sum_likelihood(m, seq))
            assert abs(ll - expected) < 1e-10

    def test_impossible_data_returns_neg_inf(self):
        m = deterministic_model()
        o_bad = ObservationTuple("R_minus", "G_road")
        seq = InteractionSequence("bad", [Step(0, A_DEFAULT, o_bad)])
        assert sequence_log_likelihood(m, seq) == -math.inf

    def test_filter_matches_forward_variables(self):
        # filter/forward consistency: forward_filter rows are the normalized
        # forward variables at every step
        rng = np.random.default_rng(17)
        m = random_model(SELECTED_STRUCTURE, rng)
        seq = random_sequence(m, rng, 7)
        beliefs = forward_filter(m, seq)
        for t in range(len(seq.steps)):
            np.testing.assert_allclose(
                beliefs[t], oracles.path_sum_filtered(m, seq, t), atol=1e-9)


class TestLabelStates:
    def _model_with_emissions(self, et, ew):
        return TrustWorkloadModel(
            structure=SELECTED_STRUCTURE,
            prior_trust=[0.3, 0.7], prior_workload=[0.4, 0.6],
            trans_trust=np.full((6, 2, 2, 2), 0.5),
            trans_workload=np.full((12, 2, 2, 2), 0.5),
            emit_trust=et, emit_workload=ew)

    def test_reliance_argmax_names_high_trust(self):
        m = self._model_with_emissions(
            [[0.0, 1.0], [1.0, 0.0]],
            [[0.2] * 5, [0.6, 0.1, 0.1, 0.1, 0.1]])
        labeled, labeling = label_states(m)
        assert labeling.trust_high_index == 0
        assert labeled.emit_trust[1, 1] == 1.0
        # priors were swapped along with the emissions
        np.testing.assert_array_equal(labeled.prior_trust, [0.7, 0.3])

    def test_entropy_names_high_workload(self):
        m = self._model_with_emissions(
            [[1.0, 0.0], [0.0, 1.0]],
            [[0.2] * 5, [1.0, 0.0, 0.0, 0.0, 0.0]])
        labeled, labeling = label_states(m)
        assert labeling.workload_high_index == 0
        entropies = emission_entropy(m)
        assert abs(entropies[0] - math.log(5)) < 1e-12
        assert entropies[1] == 0.0

    def test_hand_computed_entropies(self):
        rows = np.array([[0.7, 0.2, 0.03, 0.04, 0.03],
                         [0.3, 0.2, 0.2, 0.15, 0.15]])
        m = self._model_with_emissions([[1.0, 0.0], [0.0, 1.0]], rows)
        _, labeling = label_states(m)
        by_hand = [-sum(p * math.log(p) for p in row) for row in rows]
        assert by_hand[1] > by_hand[0]
        assert labeling.workload_high_index == 1
        np.testing.assert_allclose(emission_entropy(m), by_hand, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        m = random_model(SELECTED_STRUCTURE, rng)
        labeled, _ = label_states(m)
        again, labeling = label_states(labeled)
        assert labeling.is_canonical
        np.testing.assert_array_equal(again.trans_trust, labeled.trans_trust)
        np.testing.assert_array_equal(again.emit_workload, labeled.emit_workload)

    def test_relabeling_preserves_likelihood(self):
        rng = np.random.default_rng(4)
        m = random_model(SELECTED_STRUCTURE, rng)
        seq = random_sequence(m, rng, 6)
        labeled, _ = label_states(m)
        assert abs(sequence_log_likelihood(m, seq)
                   - sequence_log_likelihood(labeled, seq)) < 1e-12

    def test_ambiguous_tie_raises(self):
        m = self._model_with_emissions(
            [[0.5, 0.5], [0.5, 0.5]],
            [[0.2] * 5, [0.6, 0.1, 0.1, 0.1, 0.1]])
        with pytest.raises(AmbiguousLabel):
            label_states(m)


class TestModelValidation:
    def test_rejects_bad_row_sum(self):
        with pytest.raises(ValueError, match="sum to 1"):
            TrustWorkloadModel(
                structure=SELECTED_STRUCTURE,
                prior_trust=[0.6, 0.6], prior_workload=[0.5, 0.5],
                trans_trust=np.full((6, 2, 2, 2), 0.5),
                trans_workload=np.full((12, 2, 2, 2), 0.5),
                emit_trust=np.full((2, 2), 0.5),
                emit_workload=np.full((2, 5), 0.2))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="negative"):
            TrustWorkloadModel(
                structure=SELECTED_STRUCTURE,
                prior_trust=[-0.5, 1.5], prior_workload=[0.5, 0.5],
                trans_trust=np.full((6, 2, 2, 2), 0.5),
                trans_workload=np.full((12, 2, 2, 2), 0.5),
                emit_trust=np.full((2, 2), 0.5),
                emit_workload=np.full((2, 5), 0.2))

    def test_rejects_wrong_action_count(self):
        with pytest.raises(ValueError, match="shape"):
            TrustWorkloadModel(
                structure=SELECTED_STRUCTURE,
                prior_trust=[0.5, 0.5], prior_workload=[0.5, 0.5],
                trans_trust=np.full((5, 2, 2, 2), 0.5),
                trans_workload=np.full((12, 2, 2, 2), 0.5),
                emit_trust=np.full((2, 2), 0.5),
                emit_workload=np.full((2, 5), 0.2))

    def test_tables_are_read_only(self):
        m = uniform_model()
        with pytest.raises(ValueError):
            m.emit_trust[0, 0] = 0.9

    def test_empty_sequence_rejected(self):
        with pytest.raises(EmptySequence):
            InteractionSequence(id="x", steps=[])
