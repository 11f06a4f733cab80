"""
Domain Service: Grasp Analysis
Fermeture de forme par friction (programme linéaire) et doigts libres
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from data.lp_solver import lp_solve
from domain.entities import ContactPoint, FormClosureResult, LinearProgram, ObjectPose


CLOSURE_THRESHOLD = 1e-8


class GraspAnalysisError(Exception):
    """Exception pour les préhensions invalides"""
    pass


def cone_edges(pose: ObjectPose, contact: ContactPoint, mu: float) -> np.ndarray:
    """Les deux arêtes normalisées (n ± μt) du cône de friction, repère monde (2×2, une par colonne)."""
    R = pose.rotation()
    n = R @ contact.normal_vector()
    t = R @ contact.tangent_vector()
    scale = 1.0 / math.sqrt(1.0 + mu * mu)
    return np.column_stack([(n + mu * t) * scale, (n - mu * t) * scale])


def primitive_wrenches(pose: ObjectPose, contacts: Sequence[ContactPoint], mu: float) -> np.ndarray:
    """Torseurs des arêtes de cône (3 × 2·nc), couple pris au centre de masse."""
    R = pose.rotation()
    columns = []
    for contact in contacts:
        arm = R @ contact.position()
        edges = cone_edges(pose, contact, mu)
        for j in range(2):
            e = edges[:, j]
            columns.append([e[0], e[1], arm[0] * e[1] - arm[1] * e[0]])
    return np.array(columns, dtype=float).T


def _edge_weights_to_forces(weights: np.ndarray, mu: float) -> np.ndarray:
    """(α+, α-) par contact → (λn, λt) dans le repère local du contact."""
    scale = 1.0 / math.sqrt(1.0 + mu * mu)
    plus, minus = weights[0::2], weights[1::2]
    forces = np.empty_like(weights)
    forces[0::2] = (plus + minus) * scale
    forces[1::2] = mu * (plus - minus) * scale
    return forces


def _check_margins(contacts: Sequence[ContactPoint], corner_distance, corner_margin: float) -> None:
    for index, contact in enumerate(contacts):
        if corner_distance(contact.s) < corner_margin - 1e-12:
            raise GraspAnalysisError(
                f"contact {index} at s={contact.s:.4f} lies inside the {corner_margin} m corner margin"
            )


def form_closure(
    pose: ObjectPose,
    contacts: Sequence[ContactPoint],
    mu: float,
    *,
    geometry=None,
) -> FormClosureResult:
    """
    Test de fermeture de forme par friction.

    max d  s.c.  α_i ≥ d,  W·α = 0,  Σα ≤ nombre d'arêtes,  α ≥ 0
    La préhension est fermée si d* > 1e-8 et si les torseurs primitifs engendrent R³.

    Args:
        geometry: RectangleGeometry optionnelle pour rejeter les contacts en marge de coin
    """
    if not contacts:
        raise GraspAnalysisError("form closure needs at least one contact")
    if geometry is not None:
        _check_margins(contacts, geometry.corner_distance, geometry.corner_margin)

    W = primitive_wrenches(pose, contacts, mu)
    n_edges = W.shape[1]
    rank = int(np.linalg.matrix_rank(W, tol=1e-9))

    # Variables [α (n_edges), d]
    c = np.zeros(n_edges + 1)
    c[-1] = -1.0
    A_ub = np.zeros((n_edges + 1, n_edges + 1))
    A_ub[:n_edges, :n_edges] = -np.eye(n_edges)
    A_ub[:n_edges, -1] = 1.0
    A_ub[-1, :n_edges] = 1.0
    b_ub = np.zeros(n_edges + 1)
    b_ub[-1] = float(n_edges)
    A_eq = np.hstack([W, np.zeros((3, 1))])
    result = lp_solve(LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.zeros(3)))
    if not result.optimal:
        raise GraspAnalysisError(f"form-closure LP returned {result.status.value}")

    margin = float(result.x[-1])
    closed = rank == 3 and margin > CLOSURE_THRESHOLD
    certificate = _edge_weights_to_forces(result.x[:n_edges], mu) if closed else None
    return FormClosureResult(is_closed=closed, margin=margin if closed else 0.0,
                             certificate=certificate, rank=rank)


def free_fingers(
    pose: ObjectPose,
    contacts: Sequence[ContactPoint],
    mu: float,
    *,
    geometry=None,
) -> List[int]:
    """Doigts dont le retrait laisse les trois autres contacts en fermeture de forme."""
    full = form_closure(pose, contacts, mu, geometry=geometry)
    if not full.is_closed:
        raise GraspAnalysisError("free_fingers requires a form-closed grasp")
    free = []
    for f in range(len(contacts)):
        others = [c for i, c in enumerate(contacts) if i != f]
        if form_closure(pose, others, mu).is_closed:
            free.append(f)
    return free


def balancing_forces(
    pose: ObjectPose,
    contacts: Sequence[ContactPoint],
    mu: float,
    wrench: np.ndarray,
    force_cap: Optional[float] = None,
) -> Optional[np.ndarray]:
    """
    Forces de contact locales (λn, λt) qui équilibrent un torseur extérieur.

    Maximise la plus petite pondération d'arête (forces au coeur des cônes) sous
    W·α = -wrench et Σα ≤ force_cap. Renvoie None si l'équilibre est impossible.
    """
    W = primitive_wrenches(pose, contacts, mu)
    n_edges = W.shape[1]
    wrench = np.asarray(wrench, dtype=float).reshape(3)
    cap = force_cap if force_cap is not None else 4.0 * max(float(np.linalg.norm(wrench)), 1e-3) * len(contacts)

    c = np.zeros(n_edges + 1)
    c[-1] = -1.0
    A_ub = np.zeros((n_edges + 1, n_edges + 1))
    A_ub[:n_edges, :n_edges] = -np.eye(n_edges)
    A_ub[:n_edges, -1] = 1.0
    A_ub[-1, :n_edges] = 1.0
    b_ub = np.zeros(n_edges + 1)
    b_ub[-1] = cap
    A_eq = np.hstack([W, np.zeros((3, 1))])
    result = lp_solve(LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=-wrench))
    if not result.optimal:
        logger.debug(f"no balancing contact forces ({result.status.value})")
        return None
    return _edge_weights_to_forces(result.x[:n_edges], mu)
