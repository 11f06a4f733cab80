"""
Output Handler Module
Écrit les résultats de campagne: trials.csv, summary.csv, speedup.txt, plans, traces et journaux du solveur
"""
import io
import json
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml
from loguru import logger

from core.file_manager import FileManagerError, file_manager
from data.plan_io import FLOAT_FORMAT, write_sequence, write_trace, write_trajectory
from domain.entities import Method, TrialRecord

PathLike = Union[str, Path]


class OutputHandlerError(Exception):
    """Exception for output handler errors"""
    pass


def trial_stem(record: TrialRecord) -> str:
    return f"goal_{record.goal_angle:+.6f}_{record.method}"


def records_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in records], columns=TrialRecord.columns())


def format_records(records: Sequence[TrialRecord]) -> str:
    return records_frame(records).to_csv(index=False, float_format=FLOAT_FORMAT)


def parse_records(content: str) -> List[TrialRecord]:
    frame = pd.read_csv(io.StringIO(content), float_precision="round_trip",
                        dtype={"method": str, "solver_status": str, "planner_status": str})
    missing = [c for c in TrialRecord.columns() if c not in frame.columns]
    if missing:
        raise OutputHandlerError(f"trials table lacks columns {missing}")
    return [TrialRecord.from_dict(row) for row in frame.to_dict(orient="records")]


def summarize(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """
    Une ligne par méthode: nombre d'essais, essais convergés, médiane/moyenne/IQR du temps
    total et de l'objectif (sur les essais convergés), taux de chute, MAE moyennes.
    """
    frame = records_frame(records)
    rows = []
    for method, group in frame.groupby("method", sort=False):
        converged = group[group["solver_status"] == "converged"]
        times = converged["total_time"].to_numpy(dtype=float)
        objective = converged["objective"].to_numpy(dtype=float)
        executed = group[group["mae_theta"].notna()]

        def stats(values: np.ndarray):
            if values.size == 0:
                return float("nan"), float("nan"), float("nan")
            q1, median, q3 = np.percentile(values, [25, 50, 75])
            return float(median), float(values.mean()), float(q3 - q1)

        t_med, t_mean, t_iqr = stats(times)
        o_med, o_mean, o_iqr = stats(objective)
        rows.append({
            "method": method,
            "trials": int(len(group)),
            "converged": int(len(converged)),
            "time_median": t_med,
            "time_mean": t_mean,
            "time_iqr": t_iqr,
            "objective_median": o_med,
            "objective_mean": o_mean,
            "objective_iqr": o_iqr,
            "drop_rate": float(executed["dropped"].mean()) if len(executed) else float("nan"),
            "mae_x_mean": float(executed["mae_x"].mean()) if len(executed) else float("nan"),
            "mae_y_mean": float(executed["mae_y"].mean()) if len(executed) else float("nan"),
            "mae_theta_mean": float(executed["mae_theta"].mean()) if len(executed) else float("nan"),
        })
    return pd.DataFrame(rows)


COST_ORDERING_TOL = 1e-6


def cost_ordering(records: Sequence[TrialRecord], tol: float = COST_ORDERING_TOL) -> pd.DataFrame:
    """
    Comparaison par but des objectifs trajectotree et cito, là où les deux ont convergé.

    La séquence planifiée ajoute des contraintes au problème général: l'objectif de
    trajectotree doit rester ≥ celui de cito à `tol` près (colonne `holds`).
    """
    frame = records_frame(records)
    converged = frame[frame["solver_status"] == "converged"]
    ours = converged[converged["method"] == Method.TRAJECTOTREE.value].set_index("goal_angle")["objective"]
    general = converged[converged["method"] == Method.CITO.value].set_index("goal_angle")["objective"]
    joined = pd.concat([ours.rename("trajectotree_objective"), general.rename("cito_objective")],
                       axis=1, join="inner").sort_index()
    joined.index.name = "goal_angle"
    joined["gap"] = joined["trajectotree_objective"] - joined["cito_objective"]
    joined["holds"] = joined["gap"] >= -tol
    return joined.reset_index()


def speedup_ratios(summary: pd.DataFrame) -> dict:
    """Temps moyen de chaque méthode de référence / temps moyen de trajectotree."""
    indexed = summary.set_index("method")
    reference = Method.TRAJECTOTREE.value
    if reference not in indexed.index:
        return {}
    base = float(indexed.loc[reference, "time_mean"])
    ratios = {}
    for method in indexed.index:
        if method == reference:
            continue
        other = float(indexed.loc[method, "time_mean"])
        ratios[method] = other / base if base > 0 and np.isfinite(base) else float("nan")
    return ratios


class OutputHandler:
    """
    Écrit les fichiers de sortie d'une campagne dans un répertoire.

    Arborescence: run.yaml, trials.csv, summary.csv, speedup.txt, cost_ordering.csv, puis plans/, traces/ et solver/
    (un fichier par essai).
    """

    def __init__(self, output_dir: PathLike, trace_every: int = 10):
        self.output_dir = Path(output_dir)
        self.trace_every = trace_every
        self.created_files: List[str] = []

    def _target(self, *parts: str) -> Path:
        return self.output_dir.joinpath(*parts)

    def _remember(self, path: Path) -> Path:
        self.created_files.append(str(path))
        return path

    def write_outcome(self, outcome) -> None:
        """Artefacts d'un essai: séquence, trajectoire, trace et journal d'itérations."""
        stem = trial_stem(outcome.record)
        try:
            if outcome.sequence is not None:
                self._remember(write_sequence(self._target("plans", f"{stem}.seq"), outcome.sequence))
            if outcome.plan is not None:
                self._remember(write_trajectory(self._target("plans", f"{stem}.traj.csv"), outcome.plan))
            if outcome.report is not None:
                self._remember(write_trace(self._target("traces", f"{stem}.trace.csv"), outcome.report,
                                           self.trace_every))
            if outcome.solution is not None:
                self._remember(self.write_iteration_log(self._target("solver", f"{stem}.jsonl"),
                                                        outcome.solution.iteration_log))
        except FileManagerError as e:
            raise OutputHandlerError(f"Failed to write artefacts for {stem}: {e}") from e

    def write_manifest(self, manifest: dict) -> Path:
        """run.yaml: graine, méthodes, N, D_cp, M̂, dt et options effectives de la campagne."""
        try:
            content = yaml.safe_dump(manifest, sort_keys=False, allow_unicode=True)
            return self._remember(file_manager.write_file(self._target("run.yaml"), content))
        except FileManagerError as e:
            raise OutputHandlerError(f"Failed to write run manifest: {e}") from e

    @staticmethod
    def write_iteration_log(path: PathLike, records: Iterable) -> Path:
        return file_manager.write_lines(path, (json.dumps(r.to_dict(), sort_keys=True) for r in records))

    def write_summary(self, records: Sequence[TrialRecord]) -> pd.DataFrame:
        """trials.csv, summary.csv, speedup.txt et cost_ordering.csv."""
        try:
            self._remember(file_manager.write_file(self._target("trials.csv"), format_records(records)))
            summary = summarize(records)
            self._remember(file_manager.write_file(
                self._target("summary.csv"), summary.to_csv(index=False, float_format=FLOAT_FORMAT)))
            ratios = speedup_ratios(summary)
            lines = [f"{method} / trajectotree mean planning time: {ratio:.3f}" for method, ratio in ratios.items()]
            self._remember(file_manager.write_lines(self._target("speedup.txt"), lines or ["no trajectotree trials"]))
            ordering = cost_ordering(records)
            self._remember(file_manager.write_file(
                self._target("cost_ordering.csv"), ordering.to_csv(index=False, float_format=FLOAT_FORMAT)))
        except FileManagerError as e:
            raise OutputHandlerError(f"Failed to write benchmark summary: {e}") from e
        violations = int((~ordering["holds"].astype(bool)).sum())
        if violations:
            logger.warning(f"cost ordering violated on {violations} of {len(ordering)} goal(s)")
        logger.info(f"benchmark results written to {self.output_dir}")
        return summary


def read_records(path: PathLike) -> List[TrialRecord]:
    try:
        return parse_records(file_manager.read_file(path))
    except FileManagerError as e:
        raise OutputHandlerError(str(e)) from e


def write_records(path: PathLike, records: Sequence[TrialRecord]) -> Optional[Path]:
    try:
        return file_manager.write_file(path, format_records(records))
    except FileManagerError as e:
        raise OutputHandlerError(str(e)) from e
