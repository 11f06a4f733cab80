"""
Domain Entity: Benchmark
Configuration de campagne et enregistrement d'un essai
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple


class Method(Enum):
    """Méthodes comparées par le banc d'essai"""
    TRAJECTOTREE = "trajectotree"
    CITO = "cito"
    CITO_WARMSTART = "cito-warmstart"


@dataclass
class BenchmarkConfig:
    """
    Campagne: buts tirés par graine × méthodes.

    `sequence_length` (N), `segment_steps` (M̂) et `dt` remplacent, s'ils sont donnés, les
    valeurs des sections search et cito; les valeurs effectives sont écrites dans run.yaml.
    """
    goals: int = 60
    goal_range: Tuple[float, float] = (-math.pi, math.pi)
    seed: int = 0
    methods: List[Method] = field(default_factory=lambda: list(Method))
    output_dir: str = "results"
    workers: int = 1
    simulate: bool = True
    scene_path: str = "config/scenes/default.yaml"
    sequence_length: Optional[int] = None
    segment_steps: Optional[int] = None
    dt: Optional[float] = None

    def __post_init__(self):
        self.methods = [m if isinstance(m, Method) else Method(m) for m in self.methods]
        self.goal_range = tuple(float(v) for v in self.goal_range)
        if self.goals < 1:
            raise ValueError("goals must be positive")
        if self.goal_range[0] > self.goal_range[1]:
            raise ValueError("goal_range must be ordered")
        if not self.methods:
            raise ValueError("at least one method is required")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.sequence_length is not None and self.sequence_length < 2:
            raise ValueError("sequence_length must be at least 2")
        if self.segment_steps is not None and self.segment_steps < 2:
            raise ValueError("segment_steps must be at least 2")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class TrialRecord:
    """Une ligne du fichier trials.csv"""
    goal_angle: float
    method: str
    search_time: float
    solve_time: float
    total_time: float
    objective: float
    solver_status: str
    planner_status: str
    mae_x: float
    mae_y: float
    mae_theta: float
    dropped: bool
    max_segment_switches: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrialRecord":
        kwargs = {}
        for f in fields(cls):
            value = data[f.name]
            if f.type in ("float",):
                value = float(value)
            elif f.type in ("int",):
                value = int(value)
            elif f.type in ("bool",):
                value = value if isinstance(value, bool) else str(value).strip().lower() == "true"
            else:
                value = str(value)
            kwargs[f.name] = value
        return cls(**kwargs)

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]
