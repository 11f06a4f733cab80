"""
Domain Entity: Trajectory
Trajectoire optimisée (états, commandes, forces) sur une grille temporelle uniforme
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .scene import N_DOF, N_FINGERS, N_FORCES, N_JOINTS


@dataclass
class CostWeights:
    """Poids de la fonction de coût: Q (pose), R (couples), L (forces), pénalité des slacks"""
    pose: Tuple[float, float, float] = (10.0, 10.0, 10.0)
    torque: float = 1e-2
    force: float = 1e-3
    slack: float = 100.0

    def __post_init__(self):
        self.pose = tuple(float(v) for v in self.pose)
        if len(self.pose) != N_DOF or min(self.pose) < 0:
            raise ValueError("pose weights must be three non-negative values")
        if self.torque < 0 or self.force < 0 or self.slack < 0:
            raise ValueError("cost weights must be non-negative")

    def q_matrix(self) -> np.ndarray:
        return np.diag(self.pose)


@dataclass
class CitoOptions:
    """Discrétisation et bornes de chemin du problème de trajectoire"""
    segment_steps: int = 12
    dt: float = 0.1
    torque_limit: float = 2.0
    normal_force_limit: float = 20.0
    tangential_force_limit: float = 20.0

    def __post_init__(self):
        if self.segment_steps < 2:
            raise ValueError("segment_steps must be at least 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class SegmentSchedule:
    """Un segment du plan de contacts: doigt libre et contacts de départ/arrivée"""
    index: int
    free_finger: Optional[int]
    start_contacts: Tuple[float, ...]
    end_contacts: Tuple[float, ...]


@dataclass
class TrajectoryPlan:
    """
    Trajectoire de M+1 noeuds espacés de dt.

    Tableaux (K = M+1): x, xd (K×3), q, qd, tau (K×8), lam (K×8, ordre (λn, λt) par doigt),
    gamma (K×4). `pin_slack` regroupe les relaxations d'épinglage du problème de transition.
    """
    dt: float
    x: np.ndarray
    xd: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    pin_slack: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kind: str = "general"
    schedule: List[SegmentSchedule] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name, width in (("x", N_DOF), ("xd", N_DOF), ("q", N_JOINTS), ("qd", N_JOINTS),
                            ("tau", N_JOINTS), ("lam", N_FORCES), ("gamma", N_FINGERS)):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if arr.shape[1] != width:
                raise ValueError(f"{name} must have {width} columns, got {arr.shape}")
            setattr(self, name, arr)
        knots = self.x.shape[0]
        for name in ("xd", "q", "qd", "tau", "lam", "gamma"):
            if getattr(self, name).shape[0] != knots:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {knots}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if np.any(self.gamma < -1e-9):
            raise ValueError("gamma must be non-negative")
        self.pin_slack = np.asarray(self.pin_slack, dtype=float).reshape(-1)

    @property
    def knots(self) -> int:
        return self.x.shape[0]

    @property
    def steps(self) -> int:
        return self.knots - 1

    @property
    def duration(self) -> float:
        return self.steps * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.knots) * self.dt

    def normal_forces(self) -> np.ndarray:
        return self.lam[:, 0::2]

    def tangential_forces(self) -> np.ndarray:
        return self.lam[:, 1::2]

    def sample(self, t: float) -> Dict[str, np.ndarray]:
        """Interpolation linéaire de toutes les grandeurs à l'instant t (saturé aux bornes)."""
        t = min(max(t, 0.0), self.duration)
        pos = t / self.dt
        k = min(int(np.floor(pos)), self.steps - 1) if self.steps > 0 else 0
        alpha = pos - k if self.steps > 0 else 0.0
        k1 = min(k + 1, self.knots - 1)
        out = {}
        for name in ("x", "xd", "q", "qd", "tau", "lam"):
            arr = getattr(self, name)
            out[name] = (1.0 - alpha) * arr[k] + alpha * arr[k1]
        return out
