"""
Presentation Layer: CLI
Interface en ligne de commande principale
"""
import math
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel

import core.settings as settings_module
from core.file_manager import FileManagerError
from data.lp_solver import lp_solve
from data.nlp_solver import check_derivatives
from data.plan_io import PlanFormatError, read_trajectory, write_sequence, write_trace, write_trajectory
from data.scene_loader import SceneConfigError, scene_loader
from domain.entities import (
    DERIVATIVE_ERROR,
    BenchmarkConfig,
    ContactSequence,
    LinearProgram,
    Method,
    SceneConfig,
    default_scene,
)
from domain.services.cito_builder import STATIC_EQUILIBRIUM, build_transition_cito, initial_guess, pack_plan
from domain.services.contact_planner import ContactPlanner
from domain.services.executor_service import (
    BenchmarkError,
    ExecutorService,
    TrialContext,
    campaign_context,
    run_manifest,
)
from domain.services.grasp_analysis import form_closure
from domain.services.kinematics import forward_kinematics, inverse_kinematics
from domain.services.simulator import Simulator
from modules.output_handler import OutputHandler, OutputHandlerError, cost_ordering, speedup_ratios
from presentation.logger import Logger
from presentation.ui_report_view import ui_report_view


app = typer.Typer(help="DexPlan - Planification de manipulation dextre planaire")
console = Console()

ConfigOption = typer.Option(None, "--config", "-c", help="Fichier settings.yaml")
SceneOption = typer.Option(None, "--scene", "-s", help="Fichier de scène YAML")


def init_app(config: Optional[Path] = None):
    """Charge les paramètres et prépare les répertoires"""
    active_settings = settings_module.get_settings(config)
    active_settings.ensure_directories()
    return active_settings


def load_scene(active_settings, scene: Optional[Path]) -> SceneConfig:
    path = Path(scene) if scene else active_settings.scene_path
    if path.exists():
        return scene_loader.load(str(path))
    if scene:
        raise SceneConfigError(f"scene file not found: {path}")
    return default_scene()


def build_context(active_settings, scene_config: SceneConfig) -> TrialContext:
    return TrialContext(
        scene=scene_config,
        search=active_settings.search,
        cito=active_settings.cito,
        weights=active_settings.weights,
        solver=active_settings.solver,
        simulation=active_settings.simulation,
        controller=active_settings.controller,
    )


def start_logger(active_settings, title: str) -> Logger:
    logger = Logger(logs_dir=active_settings.logs_dir)
    logger.set_level(active_settings.log_level)
    logger.log_header(title)
    return logger


def _fail(logger: Logger, message: str) -> None:
    logger.log_error(message)
    raise typer.Exit(code=1)


@app.command()
def plan(
    goal: float = typer.Option(..., "--goal", "-g", help="Angle de but de l'objet [rad]"),
    method: Method = typer.Option(Method.TRAJECTOTREE, "--method", "-m", help="Méthode de planification"),
    output_dir: Path = typer.Option(Path("results/plans"), "--output-dir", "-o", help="Répertoire de sortie"),
    config: Optional[Path] = ConfigOption,
    scene: Optional[Path] = SceneOption,
):
    """
    Planifie une trajectoire pour un but et une méthode, écrit le plan
    """
    active_settings = init_app(config)
    logger = start_logger(active_settings, "DexPlan - Planification")
    try:
        context = build_context(active_settings, load_scene(active_settings, scene))
        executor = ExecutorService(context)
        outcome = executor.run_trial(goal, method, simulate=False)
        if outcome.error:
            _fail(logger, outcome.error)
        ui_report_view.display_trial(outcome.record)
        stem = f"{method.value}_{goal:+.4f}"
        if outcome.sequence is not None:
            path = write_sequence(output_dir / f"{stem}.seq", outcome.sequence)
            logger.log_info(f"Sequence: {path}")
        if outcome.plan is not None:
            path = write_trajectory(output_dir / f"{stem}.traj.csv", outcome.plan)
            logger.log_info(f"Trajectory: {path}")
        else:
            logger.log_warning(f"No trajectory: planner status {outcome.record.planner_status}")
    except (SceneConfigError, FileManagerError) as e:
        _fail(logger, str(e))


@app.command()
def simulate(
    plan_file: Path = typer.Argument(..., help="Fichier de trajectoire (.traj.csv)"),
    trace: Optional[Path] = typer.Option(None, "--trace", "-t", help="Fichier de trace à écrire"),
    follow_reference: bool = typer.Option(False, "--follow-reference", help="Impose l'état de référence à chaque pas"),
    config: Optional[Path] = ConfigOption,
    scene: Optional[Path] = SceneOption,
):
    """
    Exécute un plan dans le simulateur avec le contrôleur d'impédance
    """
    active_settings = init_app(config)
    logger = start_logger(active_settings, "DexPlan - Simulation")
    try:
        scene_config = load_scene(active_settings, scene)
        trajectory = read_trajectory(plan_file)
        options = active_settings.simulation
        if follow_reference:
            options = replace(options, follow_reference=True)
        report = Simulator(scene_config, options).execute_plan(trajectory, active_settings.controller)
        ui_report_view.display_execution(report)
        target = trace or plan_file.with_name(plan_file.name.replace(".traj.csv", "") + ".trace.csv")
        write_trace(target, report, options.trace_every)
        logger.log_info(f"Trace: {target}")
    except (SceneConfigError, PlanFormatError, FileManagerError) as e:
        _fail(logger, str(e))


@app.command()
def bench(
    goals: Optional[int] = typer.Option(None, "--goals", "-n", help="Nombre d'angles de but"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Graine aléatoire"),
    methods: Optional[List[Method]] = typer.Option(None, "--method", "-m", help="Méthodes (répétable)"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Répertoire des résultats"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Processus parallèles"),
    sequence_length: Optional[int] = typer.Option(None, "--sequence-length", "-N", help="Longueur N des séquences"),
    segment_steps: Optional[int] = typer.Option(None, "--segment-steps", help="Pas de collocation par segment (M̂)"),
    dt: Optional[float] = typer.Option(None, "--dt", help="Pas de temps de la transcription [s]"),
    no_simulate: bool = typer.Option(False, "--no-simulate", help="Ne pas exécuter les plans"),
    config: Optional[Path] = ConfigOption,
    scene: Optional[Path] = SceneOption,
):
    """
    Campagne complète: buts aléatoires × méthodes, écrit trials.csv et summary.csv
    """
    active_settings = init_app(config)
    logger = start_logger(active_settings, "DexPlan - Benchmark")
    base = active_settings.benchmark
    try:
        bench_config = BenchmarkConfig(
            goals=goals if goals is not None else base.goals,
            goal_range=base.goal_range,
            seed=seed if seed is not None else base.seed,
            methods=list(methods) if methods else base.methods,
            output_dir=str(output_dir) if output_dir else base.output_dir,
            workers=workers if workers is not None else base.workers,
            simulate=base.simulate and not no_simulate,
            sequence_length=sequence_length if sequence_length is not None else base.sequence_length,
            segment_steps=segment_steps if segment_steps is not None else base.segment_steps,
            dt=dt if dt is not None else base.dt,
        )
        context = build_context(active_settings, load_scene(active_settings, scene))
        handler = OutputHandler(bench_config.output_dir, active_settings.simulation.trace_every)
        executor = ExecutorService(campaign_context(context, bench_config))
        handler.write_manifest(run_manifest(executor.context, bench_config))
        executor.on_trial_started = lambda g, m: logger.log_trial_start(g, m.value)
        executor.on_trial_failed = lambda g, m, e: logger.log_trial_fail(g, m.value, str(e))

        def on_complete(outcome):
            logger.log_trial_complete(outcome.record)
            handler.write_outcome(outcome)

        executor.on_trial_completed = on_complete
        outcomes = executor.run_benchmark(bench_config)
        summary = handler.write_summary([o.record for o in outcomes])
        ui_report_view.display_summary(summary, speedup_ratios(summary))
        ui_report_view.display_cost_ordering(cost_ordering([o.record for o in outcomes]))
        errors = [o for o in outcomes if o.error]
        if errors:
            logger.log_warning(f"{len(errors)} trial(s) recorded with an internal error")
    except (SceneConfigError, OutputHandlerError, FileManagerError, BenchmarkError, ValueError) as e:
        _fail(logger, str(e))


def _self_tests(scene_config: SceneConfig) -> List[Tuple[str, bool, str]]:
    checks: List[Tuple[str, bool, str]] = []
    rng = np.random.default_rng(0)

    worst = 0.0
    for _ in range(200):
        q = rng.uniform(-math.pi, math.pi, size=2)
        base, links = scene_config.finger_bases[0], scene_config.link_lengths[0]
        tip = forward_kinematics(base, links, q)
        branch = 1 if math.sin(q[1]) >= 0 else -1
        solved = inverse_kinematics(base, links, tip, branch)
        if solved is not None:
            worst = max(worst, float(np.linalg.norm(forward_kinematics(base, links, solved) - tip)))
    checks.append(("FK/IK round trip", worst < 1e-9, f"max error {worst:.2e} m"))

    planner = ContactPlanner(scene_config)
    root = planner.initial_node(scene_config.start_pose, scene_config.start_contacts)
    closure = form_closure(root.pose, root.contacts, scene_config.friction_mu)
    checks.append(("start grasp form closure", closure.is_closed, f"margin {closure.margin:.4g}"))

    lp = LinearProgram(c=np.array([-1.0, -1.0]), A_ub=np.array([[1.0, 2.0], [3.0, 1.0]]), b_ub=np.array([4.0, 6.0]))
    result = lp_solve(lp)
    ok = result.optimal and abs(result.value + 2.8) < 1e-9
    checks.append(("dense simplex", ok, f"value {result.value:.6g} (expected -2.8)"))
    return checks


@app.command()
def check(
    tol: float = typer.Option(1e-6, "--tol", help=f"Tolérance sur l'erreur des dérivées {DERIVATIVE_ERROR}"),
    config: Optional[Path] = ConfigOption,
    scene: Optional[Path] = SceneOption,
):
    """
    Auto-tests: dérivées du problème de transition et noyaux numériques
    """
    active_settings = init_app(config)
    logger = start_logger(active_settings, "DexPlan - Auto-tests")
    try:
        scene_config = load_scene(active_settings, scene)
    except SceneConfigError as e:
        _fail(logger, str(e))

    checks = _self_tests(scene_config)
    planner = ContactPlanner(scene_config)
    root = planner.initial_node(scene_config.start_pose, scene_config.start_contacts)
    if root.joints is None:
        _fail(logger, "start contacts are not reachable")
    nodes = [root] + [planner.make_node(d, root.pose, root.contacts, None) for d in (1, 2)]
    for parent, child in zip(nodes, nodes[1:]):
        child.parent = parent
    sequence = ContactSequence(nodes)
    steps, dt = 2, active_settings.cito.dt
    init = initial_guess(STATIC_EQUILIBRIUM, scene_config, 2 * steps, dt, sequence=sequence)
    problem = build_transition_cito(scene_config, sequence, steps, dt, active_settings.weights)
    z = pack_plan(problem, init)
    z = np.clip(z + 1e-3 * np.random.default_rng(1).standard_normal(problem.n), problem.lower, problem.upper)
    report = check_derivatives(problem, z)
    ui_report_view.display_derivatives(report, tol)
    checks.append(("CITO derivatives", report.passed(tol), f"worst {report.worst.block} {report.worst.error:.2e}"))
    ui_report_view.display_checks(checks)
    if not all(ok for _, ok, _ in checks):
        _fail(logger, "self-tests failed")


@app.command()
def version():
    """
    Affiche la version de DexPlan
    """
    active_settings = settings_module.get_settings()
    version_info = f"""
DexPlan v{active_settings.metadata.get('version', '1.0.0')}

Contact sequence planning and contact-implicit trajectory optimization
for planar dexterous manipulation
    """
    console.print(Panel(version_info.strip(), border_style="cyan"))


def main():
    """Point d'entrée principal"""
    app()


if __name__ == "__main__":
    main()
