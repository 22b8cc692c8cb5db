"""Decentralized helper selection in peer-assisted streaming via regret tracking."""
from .benchmark import StateSpace, peer_value, solve_centralized, verify_lp_feasibility
from .environment import (CapacityChain, DemandModel, MetricsTrace, SimulationConfig, chain_step,
                          min_bandwidth_deficit, run_simulation, server_load, stationary_distribution)
from .game import (ContractError, EmpiricalJointDistribution, check_correlated_equilibrium,
                   counterfactual_utility, jain_fairness, realized_utility, social_welfare)
from .learning import R2HS, RTHS, BestResponse, LearningParams, best_response_step, sample_action

__version__ = "0.1.0"
