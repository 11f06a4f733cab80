"""
Data Layer: Plan I/O
Formats texte des séquences de contacts, des trajectoires et des traces de simulation

Séquence: une ligne par noeud, `depth x y theta s0 s1 s2 s3 q0 ... q7`, séparés par
des espaces, lignes `#` ignorées.
Trajectoire: CSV avec en-tête, une ligne par noeud (colonnes de `trajectory_columns`);
les lignes `# clé=valeur` en tête portent dt, le type, les slacks d'épinglage et le calendrier.
Trace: CSV avec en-tête (colonnes de `trace_columns`).
"""
import io
import json
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from core.file_manager import FileManagerError, file_manager
from domain.entities import (
    N_DOF,
    N_FINGERS,
    N_JOINTS,
    ContactSequence,
    ExecutionReport,
    JointConfig,
    ObjectPose,
    PlanNode,
    SegmentSchedule,
    TrajectoryPlan,
)
from domain.entities.simulation import trace_columns
from domain.services.kinematics import RectangleGeometry

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


class PlanFormatError(Exception):
    """Exception pour les fichiers de plan mal formés"""
    pass


# ---------------------------------------------------------------------------
# Séquences de contacts
# ---------------------------------------------------------------------------

SEQUENCE_HEADER = "# depth x y theta " + " ".join(f"s{f}" for f in range(N_FINGERS)) + " " + \
    " ".join(f"q{j}" for j in range(N_JOINTS))


def format_sequence(sequence: ContactSequence) -> str:
    lines = [SEQUENCE_HEADER]
    for node in sequence.nodes:
        values = [*node.pose.as_array(), *node.arc_lengths(), *node.joints.as_array()]
        lines.append(" ".join([str(node.depth)] + [FLOAT_FORMAT % v for v in values]))
    return "\n".join(lines) + "\n"


def parse_sequence(content: str, geometry: RectangleGeometry) -> ContactSequence:
    """Reconstruit les noeuds; les contacts sont recalculés à partir des abscisses curvilignes."""
    width = 1 + N_DOF + N_FINGERS + N_JOINTS
    nodes: List[PlanNode] = []
    for number, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != width:
            raise PlanFormatError(f"line {number}: expected {width} fields, got {len(parts)}")
        try:
            depth = int(parts[0])
            values = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise PlanFormatError(f"line {number}: {e}") from e
        pose = ObjectPose.from_array(values[:N_DOF])
        arcs = values[N_DOF:N_DOF + N_FINGERS]
        joints = JointConfig(tuple(values[N_DOF + N_FINGERS:]))
        nodes.append(PlanNode(
            depth=depth,
            pose=pose,
            joints=joints,
            contacts=tuple(geometry.surface_point(s) for s in arcs),
            parent=nodes[-1] if nodes else None,
        ))
    try:
        return ContactSequence(nodes)
    except ValueError as e:
        raise PlanFormatError(str(e)) from e


def write_sequence(path: PathLike, sequence: ContactSequence) -> Path:
    return file_manager.write_file(path, format_sequence(sequence))


def read_sequence(path: PathLike, geometry: RectangleGeometry) -> ContactSequence:
    try:
        return parse_sequence(file_manager.read_file(path), geometry)
    except FileManagerError as e:
        raise PlanFormatError(str(e)) from e


# ---------------------------------------------------------------------------
# Trajectoires
# ---------------------------------------------------------------------------

_BLOCKS: Tuple[Tuple[str, List[str]], ...] = (
    ("x", ["x", "y", "theta"]),
    ("xd", ["xd", "yd", "thetad"]),
    ("q", [f"q{j}" for j in range(N_JOINTS)]),
    ("qd", [f"qd{j}" for j in range(N_JOINTS)]),
    ("tau", [f"tau{j}" for j in range(N_JOINTS)]),
    ("lam", [f"{kind}{f}" for f in range(N_FINGERS) for kind in ("lamn", "lamt")]),
    ("gamma", [f"gamma{f}" for f in range(N_FINGERS)]),
)


def trajectory_columns() -> List[str]:
    return ["t"] + [c for _, cols in _BLOCKS for c in cols]


def trajectory_frame(plan: TrajectoryPlan) -> pd.DataFrame:
    data: Dict[str, np.ndarray] = {"t": plan.times()}
    for name, cols in _BLOCKS:
        block = getattr(plan, name)
        for i, col in enumerate(cols):
            data[col] = block[:, i]
    return pd.DataFrame(data, columns=trajectory_columns())


def format_trajectory(plan: TrajectoryPlan) -> str:
    header = [
        f"# dt={FLOAT_FORMAT % plan.dt}",
        f"# kind={plan.kind}",
        f"# pin_slack={json.dumps([float(v) for v in plan.pin_slack])}",
        "# schedule=" + json.dumps([
            [s.index, s.free_finger, list(s.start_contacts), list(s.end_contacts)] for s in plan.schedule
        ]),
    ]
    body = trajectory_frame(plan).to_csv(index=False, float_format=FLOAT_FORMAT)
    return "\n".join(header) + "\n" + body


def parse_trajectory(content: str) -> TrajectoryPlan:
    meta: Dict[str, str] = {}
    for line in content.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].strip().partition("=")
        meta[key.strip()] = value.strip()
    if "dt" not in meta:
        raise PlanFormatError("trajectory file lacks a '# dt=' header line")
    try:
        frame = pd.read_csv(io.StringIO(content), comment="#", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise PlanFormatError(f"unreadable trajectory table: {e}") from e
    missing = [c for c in trajectory_columns() if c not in frame.columns]
    if missing:
        raise PlanFormatError(f"trajectory table lacks columns {missing}")

    arrays = {name: frame[cols].to_numpy(dtype=float) for name, cols in _BLOCKS}
    schedule = [
        SegmentSchedule(int(i), None if f is None else int(f), tuple(a), tuple(b))
        for i, f, a, b in json.loads(meta.get("schedule", "[]"))
    ]
    try:
        return TrajectoryPlan(
            dt=float(meta["dt"]),
            pin_slack=np.array(json.loads(meta.get("pin_slack", "[]")), dtype=float),
            kind=meta.get("kind", "general"),
            schedule=schedule,
            **arrays,
        )
    except ValueError as e:
        raise PlanFormatError(str(e)) from e


def write_trajectory(path: PathLike, plan: TrajectoryPlan) -> Path:
    return file_manager.write_file(path, format_trajectory(plan))


def read_trajectory(path: PathLike) -> TrajectoryPlan:
    try:
        return parse_trajectory(file_manager.read_file(path))
    except FileManagerError as e:
        raise PlanFormatError(str(e)) from e


# ---------------------------------------------------------------------------
# Traces de simulation
# ---------------------------------------------------------------------------

def trace_frame(report: ExecutionReport, every: int = 1) -> pd.DataFrame:
    """Une ligne toutes les `every` ticks: temps, pose, pose de référence, forces par doigt."""
    rows = slice(None, None, max(1, every))
    data: Dict[str, np.ndarray] = {"t": report.times[rows]}
    for i, name in enumerate(("x", "y", "theta")):
        data[name] = report.poses[rows, i]
        data[f"{name}_ref"] = report.reference_poses[rows, i]
    for f in range(N_FINGERS):
        data[f"fn{f}"] = report.normal_forces[rows, f]
        data[f"ft{f}"] = report.tangential_forces[rows, f]
        data[f"contact{f}"] = report.contact_flags[rows, f].astype(int)
    return pd.DataFrame(data, columns=trace_columns())


def write_trace(path: PathLike, report: ExecutionReport, every: int = 1) -> Path:
    body = trace_frame(report, every).to_csv(index=False, float_format=FLOAT_FORMAT)
    return file_manager.write_file(path, body)


def read_trace(path: PathLike) -> pd.DataFrame:
    try:
        content = file_manager.read_file(path)
    except FileManagerError as e:
        raise PlanFormatError(str(e)) from e
    frame = pd.read_csv(io.StringIO(content), float_precision="round_trip")
    if list(frame.columns) != trace_columns():
        raise PlanFormatError("trace columns do not match the trace format")
    return frame
