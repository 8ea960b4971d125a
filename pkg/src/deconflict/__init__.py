"""Decentralized pairwise UAS deconfliction with robustness tubes.

Main entry points: :func:`solve_campc` (single-vehicle avoidance LP),
:func:`solve_central` (centralized two-vehicle problem), :func:`l2f` and
:func:`lnf_step` (pairwise and fleet avoidance) and the ``deconflict`` CLI.
"""
from .campc import CampcResult, solve_campc, verify_separation
from .central import MilpDeconflictResult, solve_central
from .dynamics import DynamicsModel, Trajectory, build_model, min_jerk_trajectory, rollout
from .geometry import RobustnessTube, conflict_indices, shrink_tubes, tube_from_trajectory
from .lnf import FleetState, L2fOutcome, UasPlan, l2f, l2f_with_repair, lnf_step, simulate_receding_horizon
from .policies import CrOutput, GreedyPolicy, LearnedPolicy, OraclePolicy, RandomPolicy
from .scenarios import Scenario, gen_colliding_pair, gen_position_swap, gen_three_way, gen_unit_cube

__version__ = "0.1.0"
