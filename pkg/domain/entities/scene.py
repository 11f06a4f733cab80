"""
Domain Entity: Scene
Décrit la scène planaire: objet rectangulaire, main à quatre doigts, poses et contacts
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np


N_FINGERS = 4
N_JOINTS = 2 * N_FINGERS
N_DOF = 3
N_FORCES = 2 * N_FINGERS


class Face(Enum):
    """Faces du rectangle, dans l'ordre du parcours trigonométrique"""
    RIGHT = 0
    TOP = 1
    LEFT = 2
    BOTTOM = 3


@dataclass(frozen=True)
class ObjectPose:
    """Pose planaire (x, y, θ) du centre de masse de l'objet"""
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ObjectPose":
        arr = np.asarray(values, dtype=float).reshape(-1)
        if arr.shape != (3,):
            raise ValueError(f"ObjectPose expects 3 values, got {arr.shape}")
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def to_world(self, local_point) -> np.ndarray:
        """Transforme un point du repère objet vers le repère monde."""
        return self.rotation() @ np.asarray(local_point, dtype=float) + np.array([self.x, self.y])

    def to_local(self, world_point) -> np.ndarray:
        return self.rotation().T @ (np.asarray(world_point, dtype=float) - np.array([self.x, self.y]))


@dataclass(frozen=True)
class ContactPoint:
    """
    Point de contact sur le périmètre de l'objet.

    `s` est l'abscisse curviligne dans [0, périmètre); `local_pos`, `normal` (entrante)
    et `tangent` sont exprimés dans le repère objet.
    """
    s: float
    face: Face
    local_pos: Tuple[float, float]
    normal: Tuple[float, float]
    tangent: Tuple[float, float]

    def position(self) -> np.ndarray:
        return np.array(self.local_pos, dtype=float)

    def normal_vector(self) -> np.ndarray:
        return np.array(self.normal, dtype=float)

    def tangent_vector(self) -> np.ndarray:
        return np.array(self.tangent, dtype=float)


@dataclass
class SceneConfig:
    """
    Configuration complète de la scène.

    Les doigts sont indexés 0..3 (haut-droite, haut-gauche, bas-gauche, bas-droite
    pour la scène par défaut); le doigt f possède les articulations 2f et 2f+1.
    """
    half_extents: Tuple[float, float] = (0.10, 0.05)
    mass: float = 0.05
    friction_mu: float = 0.7
    gravity: float = 9.81
    finger_bases: Tuple[Tuple[float, float], ...] = (
        (0.18, 0.13),
        (-0.18, 0.13),
        (-0.18, -0.13),
        (0.18, -0.13),
    )
    link_lengths: Tuple[Tuple[float, float], ...] = ((0.15, 0.10),) * N_FINGERS
    elbow_branches: Tuple[int, ...] = (1, -1, 1, -1)
    joint_limits: Tuple[Tuple[float, float], ...] = ((-math.pi, math.pi),) * N_JOINTS
    fingertip_radius: float = 0.01
    corner_margin: float = 0.01
    joint_inertia: float = 1.0e-3
    link_masses: Tuple[float, float] = (0.02, 0.02)
    joint_damping: float = 0.01
    start_pose: ObjectPose = field(default_factory=lambda: ObjectPose(0.0, 0.0, 0.0))
    start_contacts: Tuple[float, ...] = (0.15, 0.25, 0.45, 0.55)

    def __post_init__(self):
        """Validation après initialisation"""
        self.half_extents = tuple(float(v) for v in self.half_extents)
        self.finger_bases = tuple(tuple(float(v) for v in b) for b in self.finger_bases)
        self.link_lengths = tuple(tuple(float(v) for v in l) for l in self.link_lengths)
        self.elbow_branches = tuple(int(b) for b in self.elbow_branches)
        self.joint_limits = tuple(tuple(float(v) for v in lim) for lim in self.joint_limits)
        self.link_masses = tuple(float(v) for v in self.link_masses)
        self.start_contacts = tuple(float(v) for v in self.start_contacts)

        if len(self.half_extents) != 2 or min(self.half_extents) <= 0:
            raise ValueError("half_extents must be two positive values")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.friction_mu <= 0:
            raise ValueError("friction_mu must be positive")
        if len(self.finger_bases) != N_FINGERS or len(self.link_lengths) != N_FINGERS:
            raise ValueError(f"exactly {N_FINGERS} fingers are supported")
        if any(l1 <= 0 or l2 <= 0 for l1, l2 in self.link_lengths):
            raise ValueError("link lengths must be positive")
        if len(self.elbow_branches) != N_FINGERS or any(b not in (-1, 1) for b in self.elbow_branches):
            raise ValueError("elbow_branches must hold one of +1/-1 per finger")
        if len(self.joint_limits) != N_JOINTS or any(lo > hi for lo, hi in self.joint_limits):
            raise ValueError(f"joint_limits must hold {N_JOINTS} ordered pairs")
        if self.fingertip_radius < 0:
            raise ValueError("fingertip_radius must be non-negative")
        if self.corner_margin <= 0:
            raise ValueError("corner_margin must be positive")
        if self.joint_inertia <= 0:
            raise ValueError("joint_inertia must be positive")
        if len(self.start_contacts) != N_FINGERS:
            raise ValueError(f"start_contacts must hold {N_FINGERS} arc lengths")

    @property
    def n_fingers(self) -> int:
        return N_FINGERS

    @property
    def n_joints(self) -> int:
        return N_JOINTS

    @property
    def width(self) -> float:
        return 2.0 * self.half_extents[0]

    @property
    def height(self) -> float:
        return 2.0 * self.half_extents[1]

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def object_inertia(self) -> float:
        return self.mass * (self.width ** 2 + self.height ** 2) / 12.0

    def object_mass_matrix(self) -> np.ndarray:
        return np.diag([self.mass, self.mass, self.object_inertia])

    def gravity_wrench(self) -> np.ndarray:
        """Torseur de gravité appliqué au centre de masse de l'objet."""
        return np.array([0.0, -self.mass * self.gravity, 0.0])

    def lower_joint_limits(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    def upper_joint_limits(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    def to_dict(self) -> Dict[str, Any]:
        """Convertit la scène en dictionnaire (même schéma que les fichiers YAML)"""
        return {
            "object": {
                "half_extents": list(self.half_extents),
                "mass": self.mass,
                "friction_mu": self.friction_mu,
            },
            "gravity": self.gravity,
            "fingers": [
                {"base": list(base), "links": list(links), "elbow_branch": branch}
                for base, links, branch in zip(self.finger_bases, self.link_lengths, self.elbow_branches)
            ],
            "joint_limits": [list(lim) for lim in self.joint_limits],
            "fingertip_radius": self.fingertip_radius,
            "corner_margin": self.corner_margin,
            "hand": {
                "joint_inertia": self.joint_inertia,
                "link_masses": list(self.link_masses),
                "joint_damping": self.joint_damping,
            },
            "start": {
                "pose": self.start_pose.as_array().tolist(),
                "contacts": list(self.start_contacts),
            },
        }


@dataclass(frozen=True)
class JointConfig:
    """Configuration articulaire de la main (8 angles)"""
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != N_JOINTS:
            raise ValueError(f"JointConfig expects {N_JOINTS} values, got {len(self.values)}")

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    @classmethod
    def from_array(cls, values) -> "JointConfig":
        return cls(tuple(float(v) for v in np.asarray(values, dtype=float).reshape(-1)))

    def finger(self, index: int) -> Tuple[float, float]:
        return self.values[2 * index], self.values[2 * index + 1]

    def within_limits(self, scene: SceneConfig, tol: float = 1e-9) -> bool:
        q = self.as_array()
        return bool(np.all(q >= scene.lower_joint_limits() - tol) and np.all(q <= scene.upper_joint_limits() + tol))


def default_scene(**overrides: Any) -> SceneConfig:
    """Scène par défaut, avec surcharges optionnelles."""
    return SceneConfig(**overrides)

