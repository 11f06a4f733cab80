"""
Domain Service: ExecutorService
Orchestration des essais: planification, optimisation, exécution simulée et campagne de benchmark
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from data.lp_solver import LpSolverError
from data.nlp_solver import NlpSolverError, nlp_solver
from domain.entities import (
    BenchmarkConfig,
    CitoOptions,
    ContactSequence,
    ControllerGains,
    CostWeights,
    ExecutionReport,
    Method,
    NlpSolution,
    ObjectPose,
    PlannerResult,
    SceneConfig,
    SearchParams,
    SimOptions,
    SolverOptions,
    TrajectoryPlan,
    TrialRecord,
)
from domain.services.cito_builder import (
    PLAN_WARM_START,
    STATIC_EQUILIBRIUM,
    CitoBuildError,
    build_general_cito,
    build_transition_cito,
    incremental_pose_targets,
    initial_guess,
    plan_from_solution,
)
from domain.services.contact_planner import ContactPlanner, PlannerError, interpolate_object_trajectory
from domain.services.grasp_analysis import GraspAnalysisError
from domain.services.simulator import SimulationError, Simulator, max_contact_changes_per_segment


NOT_RUN = "not-run"
ERROR = "error"

# Erreurs internes enregistrées comme essais en erreur
TRIAL_ERRORS = (
    CitoBuildError,
    GraspAnalysisError,
    LpSolverError,
    NlpSolverError,
    PlannerError,
    SimulationError,
    ValueError,
    RuntimeError,
    np.linalg.LinAlgError,
)


class BenchmarkError(Exception):
    """Exception pour les configurations de campagne invalides"""
    pass


@dataclass
class TrialContext:
    """Tout ce dont un essai a besoin; picklable pour les workers."""
    scene: SceneConfig
    search: SearchParams = field(default_factory=SearchParams)
    cito: CitoOptions = field(default_factory=CitoOptions)
    weights: CostWeights = field(default_factory=CostWeights)
    solver: SolverOptions = field(default_factory=SolverOptions)
    simulation: SimOptions = field(default_factory=SimOptions)
    controller: ControllerGains = field(default_factory=ControllerGains)


@dataclass
class TrialOutcome:
    """Enregistrement d'un essai et ses artefacts (plan, séquence, exécution, solveur)"""
    record: TrialRecord
    plan: Optional[TrajectoryPlan] = None
    sequence: Optional[ContactSequence] = None
    report: Optional[ExecutionReport] = None
    solution: Optional[NlpSolution] = None
    error: str = ""


def sample_goals(config: BenchmarkConfig) -> np.ndarray:
    """Angles de but uniformes sur la plage configurée, reproductibles par la graine."""
    rng = np.random.default_rng(config.seed)
    low, high = config.goal_range
    return rng.uniform(low, high, size=config.goals)


def goal_pose(scene: SceneConfig, angle: float) -> ObjectPose:
    start = scene.start_pose
    return ObjectPose(start.x, start.y, float(angle))


def campaign_context(context: TrialContext, config: BenchmarkConfig) -> TrialContext:
    """Contexte effectif d'une campagne: N, M̂ et dt de la configuration remplacent ceux du contexte."""
    search, cito = context.search, context.cito
    if config.sequence_length is not None:
        search = replace(search, sequence_length=config.sequence_length)
    if config.segment_steps is not None:
        cito = replace(cito, segment_steps=config.segment_steps)
    if config.dt is not None:
        cito = replace(cito, dt=config.dt)
    return replace(context, search=search, cito=cito)


def run_manifest(context: TrialContext, config: BenchmarkConfig) -> Dict[str, Any]:
    """Description d'une campagne (run.yaml), suffisante pour relire trials.csv."""
    return {
        "goals": config.goals,
        "goal_range": [float(v) for v in config.goal_range],
        "seed": config.seed,
        "methods": [m.value for m in config.methods],
        "simulate": config.simulate,
        "sequence_length": context.search.sequence_length,
        "displacements": [float(d) for d in context.search.displacements()],
        "segment_steps": context.cito.segment_steps,
        "dt": context.cito.dt,
        "weights": {**asdict(context.weights), "pose": [float(w) for w in context.weights.pose]},
        "solver": asdict(context.solver),
        "simulation": asdict(context.simulation),
        "controller": asdict(context.controller),
    }


class ExecutorService:
    """
    Service responsable de l'exécution des essais.

    Trois méthodes partagent le même coût (suivi incrémental des poses x*_n):
    trajectotree (séquence planifiée puis CITO de transition), cito (CITO générale
    initialisée à l'équilibre statique) et cito-warmstart (CITO générale initialisée
    par la séquence planifiée, sans ses contraintes).
    """

    def __init__(self, context: TrialContext):
        self.context = context
        self.on_trial_started: Optional[Callable[[float, Method], None]] = None
        self.on_trial_completed: Optional[Callable[[TrialOutcome], None]] = None
        self.on_trial_failed: Optional[Callable[[float, Method, Exception], None]] = None

    # ------------------------------------------------------------------
    # Essai unique
    # ------------------------------------------------------------------
    def run_trial(self, goal_angle: float, method: Method, *, simulate: bool = True) -> TrialOutcome:
        """
        Exécute un essai complet; les échecs du planificateur et du solveur sont enregistrés,
        les erreurs internes aussi (champ `error`) sans interrompre l'appelant.
        """
        method = Method(method)
        if self.on_trial_started:
            self.on_trial_started(goal_angle, method)
        try:
            outcome = self._run(goal_angle, method, simulate)
        except TRIAL_ERRORS as exc:
            return self._failed(goal_angle, method, exc)
        if self.on_trial_completed:
            self.on_trial_completed(outcome)
        return outcome

    def _run(self, goal_angle: float, method: Method, simulate: bool) -> TrialOutcome:
        ctx = self.context
        scene = ctx.scene
        steps = ctx.cito.segment_steps
        dt = ctx.cito.dt
        goal = goal_pose(scene, goal_angle)
        poses = interpolate_object_trajectory(scene.start_pose, goal, ctx.search.sequence_length)
        planner = ContactPlanner(scene, ctx.search)

        search_time = 0.0
        planner_status = NOT_RUN
        sequence: Optional[ContactSequence] = None
        if method in (Method.TRAJECTOTREE, Method.CITO_WARMSTART):
            result: PlannerResult = planner.plan(poses, scene.start_contacts)
            search_time = result.search_time
            planner_status = result.status.value
            if not result.success:
                record = self._empty_record(goal_angle, method, NOT_RUN, planner_status)
                record.search_time = search_time
                record.total_time = search_time
                return TrialOutcome(record)
            sequence = result.sequence

        started = time.perf_counter()
        horizon = (ctx.search.sequence_length - 1) * steps
        if method == Method.TRAJECTOTREE:
            init = initial_guess(PLAN_WARM_START, scene, horizon, dt, sequence=sequence)
            problem = build_transition_cito(scene, sequence, steps, dt, ctx.weights, options=ctx.cito, init=init)
        else:
            start_node = planner.initial_node(scene.start_pose, scene.start_contacts)
            if start_node.joints is None:
                raise CitoBuildError("start contacts are not reachable")
            if method == Method.CITO:
                init = initial_guess(STATIC_EQUILIBRIUM, scene, horizon, dt, start=start_node)
            else:
                init = initial_guess(PLAN_WARM_START, scene, horizon, dt, sequence=sequence)
            problem = build_general_cito(
                scene, scene.start_pose, start_node.joints, goal, horizon, dt, ctx.weights, init,
                options=ctx.cito, pose_targets=incremental_pose_targets(poses, steps),
            )

        solution = nlp_solver.solve(problem, problem.initial, ctx.solver)
        solve_time = time.perf_counter() - started
        plan = plan_from_solution(problem, solution.z)
        plan.metadata.update(method=method.value, goal_angle=goal_angle, solver_status=solution.status.value)

        mae = (math.nan, math.nan, math.nan)
        dropped = False
        switches = 0
        report = None
        if simulate:
            report = Simulator(scene, ctx.simulation).execute_plan(plan, ctx.controller)
            mae = (report.mae_x, report.mae_y, report.mae_theta)
            dropped = report.dropped
            switches = max_contact_changes_per_segment(report, steps * dt)

        record = TrialRecord(
            goal_angle=float(goal_angle),
            method=method.value,
            search_time=search_time,
            solve_time=solve_time,
            total_time=search_time + solve_time,
            objective=float(solution.objective),
            solver_status=solution.status.value,
            planner_status=planner_status,
            mae_x=float(mae[0]),
            mae_y=float(mae[1]),
            mae_theta=float(mae[2]),
            dropped=bool(dropped),
            max_segment_switches=int(switches),
        )
        logger.info(
            f"trial goal={goal_angle:+.4f} {method.value}: {solution.status.value}, "
            f"total {record.total_time:.2f}s, objective {record.objective:.4g}"
        )
        return TrialOutcome(record, plan, sequence, report, solution)

    def _failed(self, goal_angle: float, method: Method, exc: Exception) -> TrialOutcome:
        message = f"{type(exc).__name__}: {exc}"
        logger.error(f"trial goal={goal_angle:+.4f} method={method.value} failed: {message}")
        if self.on_trial_failed:
            self.on_trial_failed(goal_angle, method, exc)
        return TrialOutcome(self._empty_record(goal_angle, method, ERROR, ERROR), error=message)

    @staticmethod
    def _empty_record(goal_angle: float, method: Method, solver_status: str, planner_status: str) -> TrialRecord:
        return TrialRecord(
            goal_angle=float(goal_angle), method=method.value, search_time=0.0, solve_time=0.0,
            total_time=0.0, objective=math.nan, solver_status=solver_status, planner_status=planner_status,
            mae_x=math.nan, mae_y=math.nan, mae_theta=math.nan, dropped=False,
        )

    # ------------------------------------------------------------------
    # Campagne
    # ------------------------------------------------------------------
    def run_benchmark(self, config: BenchmarkConfig) -> List[TrialOutcome]:
        """
        Tous les essais (but × méthode), en série ou dans un pool de processus.

        Les résultats sont triés par angle de but puis par ordre des méthodes.
        """
        if len(set(config.methods)) != len(config.methods):
            raise BenchmarkError(f"duplicate methods in campaign: {[m.value for m in config.methods]}")
        self.context = campaign_context(self.context, config)
        jobs = [(float(goal), method) for goal in sample_goals(config) for method in config.methods]
        logger.info(f"benchmark: {config.goals} goals × {len(config.methods)} methods, {config.workers} worker(s)")
        if config.workers == 1:
            outcomes = [self.run_trial(goal, method, simulate=config.simulate) for goal, method in jobs]
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_run_job, self.context, goal, method, config.simulate) for goal, method in jobs]
                outcomes = []
                for (goal, method), future in zip(jobs, futures):
                    try:
                        outcome = future.result()
                    except Exception as exc:
                        # worker mort ou erreur non prévue: l'essai est enregistré, la campagne continue
                        outcomes.append(self._failed(goal, Method(method), exc))
                        continue
                    if outcome.error:
                        if self.on_trial_failed:
                            self.on_trial_failed(goal, Method(method), RuntimeError(outcome.error))
                    elif self.on_trial_completed:
                        self.on_trial_completed(outcome)
                    outcomes.append(outcome)
        order = {m: i for i, m in enumerate(config.methods)}
        outcomes.sort(key=lambda o: (o.record.goal_angle, order[Method(o.record.method)]))
        return outcomes


def _run_job(context: TrialContext, goal: float, method: Method, simulate: bool) -> TrialOutcome:
    outcome = ExecutorService(context).run_trial(goal, method, simulate=simulate)
    # Les entrées de journal du solveur suffisent côté parent
    if outcome.solution is not None:
        outcome.solution.multipliers_eq = np.zeros(0)
        outcome.solution.multipliers_ineq = np.zeros(0)
    return outcome


def run_trial(goal_angle: float, method: Method, context: TrialContext, *, simulate: bool = True) -> TrialOutcome:
    return ExecutorService(context).run_trial(goal_angle, method, simulate=simulate)


def run_benchmark(config: BenchmarkConfig, context: TrialContext) -> List[TrialOutcome]:
    return ExecutorService(context).run_benchmark(config)
