"""Coupled trust-workload modeling and adaptive transparency policies."""

from .categories import ActionTuple, Context, JointState, ObservationTuple
from .data import Dataset, FixationEvent, InteractionSequence, Step
from .estimation import FitConfig, FitResult, em_fit, forward_backward, multi_restart_fit
from .model import (
    ActionStructure,
    RewardSpec,
    SELECTED_STRUCTURE,
    TrustWorkloadModel,
    belief_update,
    joint_emission,
    joint_transition,
    label_states,
    reduce_action,
    sequence_log_likelihood,
)
from .selection import SelectionConfig, SelectionReport, count_parameters, enumerate_structures, select_structure
from .solver import QmdpPolicy, SolverConfig, policy_grid, qmdp_action, value_iteration
from .simulation import run_closed_loop, scenario_generate, step_response

__version__ = "0.1.0"
