"""Domain Entities"""
from .scene import (
    N_DOF,
    N_FINGERS,
    N_FORCES,
    N_JOINTS,
    ContactPoint,
    Face,
    JointConfig,
    ObjectPose,
    SceneConfig,
    default_scene,
)
from .plan import ContactSequence, PlanNode, PlannerResult, SearchParams, SearchStatus
from .trajectory import CitoOptions, CostWeights, SegmentSchedule, TrajectoryPlan
from .nlp import (
    DERIVATIVE_ERROR,
    BlockError,
    DerivativeReport,
    FormClosureResult,
    IterationRecord,
    LinearProgram,
    LpResult,
    LpStatus,
    NlpProblem,
    NlpSolution,
    SolverOptions,
    SolverStatus,
    VariableLayout,
)
from .simulation import ContactForces, ControllerGains, ExecutionReport, SimOptions, SimState
from .benchmark import BenchmarkConfig, Method, TrialRecord

__all__ = [
    "N_DOF", "N_FINGERS", "N_FORCES", "N_JOINTS",
    "ContactPoint", "Face", "JointConfig", "ObjectPose", "SceneConfig", "default_scene",
    "ContactSequence", "PlanNode", "PlannerResult", "SearchParams", "SearchStatus",
    "CitoOptions", "CostWeights", "SegmentSchedule", "TrajectoryPlan",
    "DERIVATIVE_ERROR",
    "BlockError", "DerivativeReport", "FormClosureResult", "IterationRecord", "LinearProgram",
    "LpResult", "LpStatus", "NlpProblem", "NlpSolution", "SolverOptions", "SolverStatus",
    "VariableLayout",
    "ContactForces", "ControllerGains", "ExecutionReport", "SimOptions", "SimState",
    "BenchmarkConfig", "Method", "TrialRecord",
]
