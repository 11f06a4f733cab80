"""
Domain Entity: Plan
Noeuds de recherche, séquences de contacts et paramètres du planificateur
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .scene import ContactPoint, JointConfig, ObjectPose


class SearchStatus(Enum):
    """Issue d'une recherche de séquence de contacts"""
    SUCCESS = "success"
    EXHAUSTED = "exhausted"
    BUDGET_EXCEEDED = "budget-exceeded"
    INFEASIBLE_START = "infeasible-start"


@dataclass
class SearchParams:
    """Paramètres de la recherche arborescente en profondeur."""
    sequence_length: int = 10
    displacement_step: float = 0.02
    displacement_count: int = 8
    max_expansions: int = 100_000
    expand_all_free_fingers: bool = True
    nominal_distal_angle: float = float(np.pi / 4.0)
    duplicate_quantum: float = 1e-6

    def __post_init__(self):
        if self.sequence_length < 2:
            raise ValueError("sequence_length must be at least 2")
        if self.displacement_step <= 0 or self.displacement_count < 0:
            raise ValueError("displacement set must be built from a positive step and a non-negative count")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be positive")

    def displacements(self) -> Tuple[float, ...]:
        """D_cp = {0, ±k·step, k = 1..count}"""
        values = [0.0]
        for k in range(1, self.displacement_count + 1):
            values.extend((k * self.displacement_step, -k * self.displacement_step))
        return tuple(values)


@dataclass(eq=False)
class PlanNode:
    """
    Noeud de l'arbre de recherche.

    Un noeud de profondeur n porte la pose cible x*_n, la configuration articulaire
    (None si l'IK échoue) et les quatre contacts dans le repère objet.
    """
    depth: int
    pose: ObjectPose
    joints: Optional[JointConfig]
    contacts: Tuple[ContactPoint, ...]
    parent: Optional["PlanNode"] = None
    heuristic: float = float("inf")
    switched_finger: Optional[int] = None
    displacement: float = 0.0
    order: int = 0

    def contact_key(self, quantum: float = 1e-6) -> Tuple[int, ...]:
        return tuple(int(round(c.s / quantum)) for c in self.contacts)

    def arc_lengths(self) -> Tuple[float, ...]:
        return tuple(c.s for c in self.contacts)

    def lineage(self) -> List["PlanNode"]:
        """Chemin racine → noeud."""
        chain: List[PlanNode] = []
        node: Optional[PlanNode] = self
        while node is not None:
            chain.append(node)
            node = node.parent
        return list(reversed(chain))


@dataclass
class ContactSequence:
    """Séquence de N noeuds (profondeurs 0..N-1) produite par le planificateur"""
    nodes: List[PlanNode]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("ContactSequence cannot be empty")
        for expected, node in enumerate(self.nodes):
            if node.depth != expected:
                raise ValueError(f"node {expected} has depth {node.depth}")
            if node.joints is None:
                raise ValueError(f"node {expected} has no joint configuration")

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def segment_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def poses(self) -> List[ObjectPose]:
        return [n.pose for n in self.nodes]

    @property
    def joints(self) -> List[JointConfig]:
        return [n.joints for n in self.nodes]

    def switch_schedule(self, tol: float = 1e-9) -> List[Optional[int]]:
        """Doigt dont le contact change sur chaque segment (None si aucun)."""
        schedule: List[Optional[int]] = []
        for prev, nxt in zip(self.nodes[:-1], self.nodes[1:]):
            moved = [
                f for f, (a, b) in enumerate(zip(prev.contacts, nxt.contacts))
                if abs(a.s - b.s) > tol
            ]
            if len(moved) > 1:
                raise ValueError(f"segment {prev.depth} moves {len(moved)} contacts")
            schedule.append(moved[0] if moved else None)
        return schedule


@dataclass
class PlannerResult:
    """Résultat d'une recherche"""
    status: SearchStatus
    sequence: Optional[ContactSequence] = None
    nodes_expanded: int = 0
    nodes_generated: int = 0
    max_depth: int = 0
    search_time: float = 0.0
    cause: str = ""
    statistics: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status == SearchStatus.SUCCESS
