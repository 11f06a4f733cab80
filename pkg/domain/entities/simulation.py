"""
Domain Entity: Simulation
État simulé, options d'intégration, gains du contrôleur et rapport d'exécution
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from .scene import N_DOF, N_JOINTS


@dataclass
class SimState:
    """État du simulateur: pose/vitesse de l'objet, angles/vitesses articulaires, temps"""
    pose: np.ndarray
    twist: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float).reshape(N_DOF).copy()
        self.twist = np.asarray(self.twist, dtype=float).reshape(N_DOF).copy()
        self.q = np.asarray(self.q, dtype=float).reshape(N_JOINTS).copy()
        self.qd = np.asarray(self.qd, dtype=float).reshape(N_JOINTS).copy()

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.pose)) and np.all(np.isfinite(self.twist))
                    and np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd)))

    def copy(self) -> "SimState":
        return SimState(self.pose, self.twist, self.q, self.qd, self.t)


@dataclass
class ControllerGains:
    kp: float = 200.0
    kv: float = 10.0

    def __post_init__(self):
        if self.kp < 0 or self.kv < 0:
            raise ValueError("controller gains must be non-negative")


@dataclass
class SimOptions:
    """Options du simulateur planaire à contacts compliants"""
    dt: float = 1e-3
    contact_stiffness: float = 1e4
    contact_damping: float = 50.0
    friction_velocity: float = 1e-3
    drop_threshold: float = 0.05
    follow_reference: bool = False
    trace_every: int = 10

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.contact_stiffness <= 0 or self.contact_damping < 0 or self.friction_velocity <= 0:
            raise ValueError("contact parameters must be positive")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")


@dataclass
class ContactForces:
    """Forces de contact d'un pas: normales, tangentielles (sur l'objet) et drapeaux actifs"""
    normal: np.ndarray
    tangential: np.ndarray
    active: np.ndarray


@dataclass
class ExecutionReport:
    """Erreurs de suivi et verdict de chute d'une exécution simulée"""
    times: np.ndarray
    pose_error: np.ndarray
    mae: np.ndarray
    dropped: bool
    drop_time: float = float("nan")
    normal_forces: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    tangential_forces: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    contact_flags: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=bool))
    poses: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    reference_poses: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    final_state: Any = None

    @property
    def mae_x(self) -> float:
        return float(self.mae[0])

    @property
    def mae_y(self) -> float:
        return float(self.mae[1])

    @property
    def mae_theta(self) -> float:
        return float(self.mae[2])

    def summary(self) -> Dict[str, Any]:
        return {
            "mae_x": self.mae_x,
            "mae_y": self.mae_y,
            "mae_theta": self.mae_theta,
            "dropped": self.dropped,
            "drop_time": self.drop_time,
            "samples": int(self.times.size),
        }


def trace_columns() -> List[str]:
    cols = ["t", "x", "y", "theta", "x_ref", "y_ref", "theta_ref"]
    for f in range(4):
        cols += [f"fn{f}", f"ft{f}", f"contact{f}"]
    return cols
