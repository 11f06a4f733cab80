"""Domain Services"""
from .cito_builder import CitoBuildError, build_general_cito, build_transition_cito, initial_guess
from .contact_planner import ContactPlanner, PlannerError, plan_contact_sequence
from .executor_service import BenchmarkError, ExecutorService, TrialContext, TrialOutcome
from .grasp_analysis import GraspAnalysisError, balancing_forces, form_closure, free_fingers
from .kinematics import GeometryError, RectangleGeometry
from .simulator import SimulationError, Simulator

__all__ = [
    "CitoBuildError", "build_general_cito", "build_transition_cito", "initial_guess",
    "ContactPlanner", "PlannerError", "plan_contact_sequence",
    "BenchmarkError", "ExecutorService", "TrialContext", "TrialOutcome",
    "GraspAnalysisError", "balancing_forces", "form_closure", "free_fingers",
    "GeometryError", "RectangleGeometry",
    "SimulationError", "Simulator",
]
