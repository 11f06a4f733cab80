"""
Domain Service: Kinematics
Cinématique des doigts plans à deux segments et géométrie de l'objet rectangulaire
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from domain.entities import (
    N_FINGERS,
    ContactPoint,
    Face,
    JointConfig,
    ObjectPose,
    SceneConfig,
)


class GeometryError(Exception):
    """Exception pour les erreurs de géométrie ou de cinématique"""
    pass


def forward_kinematics(base: Sequence[float], links: Sequence[float], joints: Sequence[float]) -> np.ndarray:
    """
    Position monde de l'extrémité du segment distal.

    Args:
        base: Position monde de la base du doigt
        links: Longueurs (proximal, distal)
        joints: Angles (proximal, distal), l'angle nul pointant selon +x

    Returns:
        Position (2,) du centre du bout de doigt
    """
    l1, l2 = links
    q1, q2 = joints
    return np.array([
        base[0] + l1 * math.cos(q1) + l2 * math.cos(q1 + q2),
        base[1] + l1 * math.sin(q1) + l2 * math.sin(q1 + q2),
    ])


def link_points(base, links, joints) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Base, coude et bout de doigt."""
    l1, _ = links
    b = np.asarray(base, dtype=float)
    elbow = b + l1 * np.array([math.cos(joints[0]), math.sin(joints[0])])
    return b, elbow, forward_kinematics(base, links, joints)


def fk_jacobian(links: Sequence[float], joints: Sequence[float]) -> np.ndarray:
    """Jacobienne 2×2 (repère monde) de la position du bout de doigt."""
    l1, l2 = links
    q1, q2 = joints
    s1, c1 = math.sin(q1), math.cos(q1)
    s12, c12 = math.sin(q1 + q2), math.cos(q1 + q2)
    return np.array([
        [-l1 * s1 - l2 * s12, -l2 * s12],
        [l1 * c1 + l2 * c12, l2 * c12],
    ])


def wrap_angle(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def inverse_kinematics(
    base: Sequence[float],
    links: Sequence[float],
    target: Sequence[float],
    branch: int,
    limits: Optional[Sequence[Tuple[float, float]]] = None,
) -> Optional[Tuple[float, float]]:
    """
    IK analytique d'un doigt à deux segments.

    Args:
        branch: +1 ou -1, signe de l'angle distal (branche du coude)
        limits: Intervalles articulaires (proximal, distal), optionnels

    Returns:
        (q1, q2) ou None si la cible est hors de l'anneau atteignable ou hors limites
    """
    l1, l2 = links
    dx = float(target[0]) - float(base[0])
    dy = float(target[1]) - float(base[1])
    r2 = dx * dx + dy * dy
    cos_q2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if abs(cos_q2) > 1.0 + 1e-12:
        return None
    cos_q2 = min(1.0, max(-1.0, cos_q2))
    q2 = (1.0 if branch >= 0 else -1.0) * math.acos(cos_q2)
    q1 = math.atan2(dy, dx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q1 = wrap_angle(q1)
    if limits is not None:
        for value, (lo, hi) in zip((q1, q2), limits):
            if value < lo - 1e-12 or value > hi + 1e-12:
                return None
    return q1, q2


def finger_joints(q: Sequence[float], finger: int) -> Tuple[float, float]:
    return float(q[2 * finger]), float(q[2 * finger + 1])


def hand_gravity(scene: SceneConfig, q: Sequence[float]) -> np.ndarray:
    """Couples de gravité g_hand(q) des segments (masses ponctuelles au milieu des segments)."""
    m1, m2 = scene.link_masses
    g = scene.gravity
    out = np.zeros(2 * N_FINGERS)
    for f in range(N_FINGERS):
        l1, l2 = scene.link_lengths[f]
        q1, q2 = finger_joints(q, f)
        c1, c12 = math.cos(q1), math.cos(q1 + q2)
        out[2 * f] = g * ((0.5 * m1 * l1 + m2 * l1) * c1 + 0.5 * m2 * l2 * c12)
        out[2 * f + 1] = g * 0.5 * m2 * l2 * c12
    return out


def hand_potential_energy(scene: SceneConfig, q: Sequence[float]) -> float:
    m1, m2 = scene.link_masses
    energy = 0.0
    for f in range(N_FINGERS):
        l1, l2 = scene.link_lengths[f]
        q1, q2 = finger_joints(q, f)
        by = scene.finger_bases[f][1]
        energy += m1 * scene.gravity * (by + 0.5 * l1 * math.sin(q1))
        energy += m2 * scene.gravity * (by + l1 * math.sin(q1) + 0.5 * l2 * math.sin(q1 + q2))
    return energy


def _cross(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def hand_jacobian(scene: SceneConfig, pose: ObjectPose, q: Sequence[float], contacts: Sequence[ContactPoint]) -> np.ndarray:
    """
    Jacobienne de la main (8×8, bloc-diagonale par doigt).

    Les lignes 2f et 2f+1 donnent la vitesse du bout de doigt f projetée sur la
    normale entrante et la tangente du contact f (repère monde).
    """
    R = pose.rotation()
    J = np.zeros((2 * N_FINGERS, 2 * N_FINGERS))
    for f, contact in enumerate(contacts):
        frame = np.vstack([R @ contact.normal_vector(), R @ contact.tangent_vector()])
        J[2 * f:2 * f + 2, 2 * f:2 * f + 2] = frame @ fk_jacobian(scene.link_lengths[f], finger_joints(q, f))
    return J


def grasp_matrix(pose: ObjectPose, contacts: Sequence[ContactPoint]) -> np.ndarray:
    """Matrice de préhension 3×8: forces locales (λn, λt) → torseur monde au centre de masse."""
    R = pose.rotation()
    G = np.zeros((3, 2 * len(contacts)))
    for f, contact in enumerate(contacts):
        arm = R @ contact.position()
        for j, direction in enumerate((contact.normal_vector(), contact.tangent_vector())):
            d = R @ direction
            G[:2, 2 * f + j] = d
            G[2, 2 * f + j] = _cross(arm, d)
    return G


@dataclass(frozen=True)
class SurfaceFrame:
    """Repère de contact au point de l'objet le plus proche d'un bout de doigt"""
    closest_local: np.ndarray
    normal_local: np.ndarray
    tangent_local: np.ndarray
    phi: float


class RectangleGeometry:
    """
    Géométrie du rectangle: paramétrage du périmètre et champ de distance signée.

    s = 0 au coin (+w/2, -h/2), parcours trigonométrique; faces droite, haut, gauche, bas.
    """

    def __init__(self, scene: SceneConfig):
        self.hx, self.hy = scene.half_extents
        self.radius = scene.fingertip_radius
        self.corner_margin = scene.corner_margin
        self.perimeter = scene.perimeter
        h, w = 2.0 * self.hy, 2.0 * self.hx
        # (face, longueur, coin de départ, direction de parcours, normale entrante)
        self._faces = (
            (Face.RIGHT, h, np.array([self.hx, -self.hy]), np.array([0.0, 1.0]), np.array([-1.0, 0.0])),
            (Face.TOP, w, np.array([self.hx, self.hy]), np.array([-1.0, 0.0]), np.array([0.0, -1.0])),
            (Face.LEFT, h, np.array([-self.hx, self.hy]), np.array([0.0, -1.0]), np.array([1.0, 0.0])),
            (Face.BOTTOM, w, np.array([-self.hx, -self.hy]), np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        )
        self._corners = np.cumsum([0.0] + [f[1] for f in self._faces])

    def wrap(self, s: float) -> float:
        wrapped = math.fmod(s, self.perimeter)
        if wrapped < 0:
            wrapped += self.perimeter
        return 0.0 if wrapped >= self.perimeter else wrapped

    def surface_point(self, s: float) -> ContactPoint:
        """Point du périmètre d'abscisse s (repliée dans [0, P))."""
        s = self.wrap(s)
        for index, (face, length, start, direction, normal) in enumerate(self._faces):
            lo, hi = self._corners[index], self._corners[index + 1]
            if s < hi or index == len(self._faces) - 1:
                pos = start + (s - lo) * direction
                return ContactPoint(
                    s=s,
                    face=face,
                    local_pos=(float(pos[0]), float(pos[1])),
                    normal=(float(normal[0]), float(normal[1])),
                    tangent=(float(direction[0]), float(direction[1])),
                )
        raise GeometryError(f"arc length {s} outside the perimeter")

    def corner_distance(self, s: float) -> float:
        s = self.wrap(s)
        gaps = np.abs(self._corners - s)
        return float(np.min(gaps))

    def in_corner_margin(self, s: float) -> bool:
        return self.corner_distance(s) < self.corner_margin - 1e-12

    def displace_contact(self, contact: ContactPoint, d: float) -> Optional[ContactPoint]:
        """Déplace le contact de d le long du périmètre; None s'il tombe dans une marge de coin."""
        s = self.wrap(contact.s + d)
        if self.in_corner_margin(s):
            return None
        return self.surface_point(s)

    def surface_frame(self, pose: ObjectPose, tip) -> SurfaceFrame:
        """Point le plus proche, normale entrante, tangente et φ pour un bout de doigt monde."""
        r = pose.to_local(tip)
        closest = np.clip(r, [-self.hx, -self.hy], [self.hx, self.hy])
        diff = r - closest
        dist = float(np.hypot(diff[0], diff[1]))
        if dist > 1e-12:
            outward = diff / dist
            sdf = dist
        else:
            pen_x = self.hx - abs(r[0])
            pen_y = self.hy - abs(r[1])
            if pen_x <= pen_y:
                outward = np.array([math.copysign(1.0, r[0]), 0.0])
            else:
                outward = np.array([0.0, math.copysign(1.0, r[1])])
            sdf = -min(pen_x, pen_y)
        normal = -outward
        tangent = np.array([normal[1], -normal[0]])
        return SurfaceFrame(closest, normal, tangent, sdf - self.radius)

    def signed_distance(self, pose: ObjectPose, tip) -> float:
        """Distance signée entre la sphère du bout de doigt et le rectangle."""
        return self.surface_frame(pose, tip).phi

    def contact_tip_local(self, contact: ContactPoint) -> np.ndarray:
        return contact.position() - self.radius * contact.normal_vector()

    def contact_tip_world(self, pose: ObjectPose, contact: ContactPoint) -> np.ndarray:
        """Centre du bout de doigt qui touche le contact donné."""
        return pose.to_world(self.contact_tip_local(contact))

    def segment_intersects(self, pose: ObjectPose, a, b) -> bool:
        """Intersection segment / rectangle fermé (découpage de Liang-Barsky)."""
        p0 = pose.to_local(a)
        p1 = pose.to_local(b)
        d = p1 - p0
        t0, t1 = 0.0, 1.0
        for p, q in (
            (-d[0], p0[0] + self.hx),
            (d[0], self.hx - p0[0]),
            (-d[1], p0[1] + self.hy),
            (d[1], self.hy - p0[1]),
        ):
            if abs(p) < 1e-15:
                if q < 0:
                    return False
                continue
            t = q / p
            if p < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 > t1:
                return False
        return True


def solve_grasp_ik(
    scene: SceneConfig,
    geometry: RectangleGeometry,
    pose: ObjectPose,
    contacts: Sequence[ContactPoint],
) -> Optional[JointConfig]:
    """IK des quatre doigts sur leurs branches fixes; None si un doigt échoue."""
    angles = []
    for f, contact in enumerate(contacts):
        limits = scene.joint_limits[2 * f:2 * f + 2]
        sol = inverse_kinematics(
            scene.finger_bases[f],
            scene.link_lengths[f],
            geometry.contact_tip_world(pose, contact),
            scene.elbow_branches[f],
            limits,
        )
        if sol is None:
            return None
        angles.extend(sol)
    return JointConfig(tuple(angles))


def links_collide(scene: SceneConfig, geometry: RectangleGeometry, pose: ObjectPose, q: Sequence[float]) -> bool:
    """Vrai si un segment d'un doigt traverse l'objet."""
    for f in range(N_FINGERS):
        base, elbow, tip = link_points(scene.finger_bases[f], scene.link_lengths[f], finger_joints(q, f))
        if geometry.segment_intersects(pose, base, elbow) or geometry.segment_intersects(pose, elbow, tip):
            return True
    return False


def fingertip_positions(scene: SceneConfig, q: Sequence[float]) -> np.ndarray:
    return np.array([
        forward_kinematics(scene.finger_bases[f], scene.link_lengths[f], finger_joints(q, f))
        for f in range(N_FINGERS)
    ])
