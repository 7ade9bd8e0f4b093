"""Bearing rigidity analysis and bearing-only formation control."""
from .errors import (
    BearingFormError,
    CollisionError,
    DegenerateError,
    InfeasibleError,
    NotRigidError,
    NumericError,
    ValidationError,
)
from .graph import Graph, build_graph, complete_graph, incidence_matrix
from .rigidity import Framework, RigidityReport, bearing_rigidity_matrix, rigidity_report
from .distance import DistanceRigidityReport, distance_rigidity_matrix, distance_rigidity_report, perp_motion
from .target import BearingConstraints, TargetSolution, compute_target, feasibility_witness
from .control_global import control_velocity, jacobian, collision_bound, degree_of_rigidity
from .control_local import LocalFormationState, body_control, closed_loop_derivative, check_sync_assumption
from .sim import SimConfig, SimulationTrace, integrate, integrate_batch, compute_metrics, collision_events

__version__ = "0.1.0"
