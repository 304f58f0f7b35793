"""Transfer-decision toolkit for hospital-to-SNF discharges.

Builds the binary-availability transfer MDP, solves it exactly under
discounted and long-run average criteria, constructs myopic and lookahead
heuristics, runs randomized dependency-scenario sweeps, estimates readmission
rates from discharge records, and serves live recommendations over HTTP.
"""

from .estimate import (DischargeRecord, EstimationError, LogisticFit, RateTable,
                       bootstrap_ci, fit_logistic, predict_rates,
                       read_discharge_csv)
from .model import (Instance, InstanceError, NextStateDistribution, SystemState,
                    action_values, bellman_apply, enumerate_states,
                    feasible_actions, instance_digest, instance_to_dict, kernel,
                    load_instance, load_instance_file)
from .policies import (OpCounter, ScoreBreakdown, ThresholdReport,
                       check_myopic_optimality_condition,
                       check_threshold_condition, count_operations,
                       explain_state, myopic_policy, rpr_policy, rpr_score,
                       two_step_policy, verify_threshold_structure)
from .scenario import (BaselineSet, ScenarioSpec, SweepRecord, SweepResult,
                       apply_scenario1, apply_scenario2, apply_scenario3,
                       build_scenario_instance, neighbors, run_sweep,
                       sample_baselines, write_sweep_csv)
from .simulate import SimulationEstimate, simulate_policy
from .solve import (MultichainPolicyError, Policy, SolveResult, SolverError,
                    evaluate_policy_average, evaluate_policy_discounted,
                    policy_iteration_average, relative_value_iteration_average,
                    solve_result_to_dict, unichain_guaranteed,
                    value_iteration_discounted)

__version__ = "0.1.0"
