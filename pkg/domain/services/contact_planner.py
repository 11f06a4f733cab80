"""
Domain Service: Contact Planner
Recherche arborescente en profondeur d'une séquence de changements de contacts
"""
from __future__ import annotations

import heapq
import time
from typing import Dict, List, Optional, Sequence, Set, Tuple

from loguru import logger

from domain.entities import (
    ContactPoint,
    ContactSequence,
    JointConfig,
    ObjectPose,
    PlannerResult,
    PlanNode,
    SceneConfig,
    SearchParams,
    SearchStatus,
)
from domain.services.grasp_analysis import GraspAnalysisError, form_closure
from domain.services.kinematics import RectangleGeometry, inverse_kinematics, link_points


# Résolution des abscisses pour la mémoire des tests de fermeture [m]
CLOSURE_QUANTUM = 1e-9
REFERENCE_POSE = ObjectPose(0.0, 0.0, 0.0)


class PlannerError(Exception):
    """Exception pour les entrées invalides du planificateur"""
    pass


def interpolate_object_trajectory(start: ObjectPose, goal: ObjectPose, n: int) -> List[ObjectPose]:
    """N poses interpolées linéairement (θ non replié), extrémités exactes."""
    if n < 2:
        raise PlannerError("a trajectory needs at least two poses")
    a, b = start.as_array(), goal.as_array()
    poses = [ObjectPose.from_array(a + (b - a) * (k / (n - 1))) for k in range(1, n - 1)]
    return [start] + poses + [goal]


def distal_heuristic(scene: SceneConfig, joints: Optional[JointConfig], nominal: float) -> float:
    """Σ_f |q_distal,f − branche_f·nominal|; infini sans configuration."""
    if joints is None:
        return float("inf")
    q = joints.as_array()
    return float(sum(abs(q[2 * f + 1] - scene.elbow_branches[f] * nominal) for f in range(scene.n_fingers)))


def _selection_key(node: PlanNode) -> Tuple[int, float, int]:
    return (-node.depth, node.heuristic, node.order)


def select_node(open_nodes: Sequence[PlanNode]) -> PlanNode:
    """Noeud le plus profond, puis d'heuristique minimale, puis premier inséré."""
    if not open_nodes:
        raise PlannerError("cannot select from an empty open set")
    return min(open_nodes, key=_selection_key)


class OpenSet:
    """Ensemble ouvert ordonné comme select_node."""

    def __init__(self):
        self._heap: List[Tuple[Tuple[int, float, int], PlanNode]] = []
        self._counter = 0

    def push(self, node: PlanNode) -> None:
        node.order = self._counter
        self._counter += 1
        heapq.heappush(self._heap, (_selection_key(node), node))

    def pop(self) -> PlanNode:
        return heapq.heappop(self._heap)[1]

    def __len__(self) -> int:
        return len(self._heap)


class ContactPlanner:
    """
    Planificateur de séquences de contacts pour une scène donnée.

    Une instance n'est pas partagée entre fils: l'arbre de recherche est mutable.
    """

    def __init__(self, scene: SceneConfig, params: Optional[SearchParams] = None):
        self.scene = scene
        self.params = params or SearchParams()
        self.geometry = RectangleGeometry(scene)
        # La fermeture ne dépend que des abscisses de contact: invariante par déplacement rigide de l'objet
        self._closure_cache: Dict[Tuple[int, ...], bool] = {}
        self.closure_tests = 0
        self._ik_cache: Dict[Tuple, Optional[Tuple[float, float]]] = {}
        self._collision_cache: Dict[Tuple, bool] = {}

    def _closure_key(self, contacts: Sequence[ContactPoint]) -> Tuple[int, ...]:
        return tuple(int(round(c.s / CLOSURE_QUANTUM)) for c in contacts)

    def _finger_key(self, pose: ObjectPose, finger: int, contact: ContactPoint) -> Tuple:
        return (pose.x, pose.y, pose.theta, finger, int(round(contact.s / CLOSURE_QUANTUM)))

    def _finger_ik(self, pose: ObjectPose, finger: int, contact: ContactPoint) -> Optional[Tuple[float, float]]:
        key = self._finger_key(pose, finger, contact)
        if key not in self._ik_cache:
            scene = self.scene
            self._ik_cache[key] = inverse_kinematics(
                scene.finger_bases[finger],
                scene.link_lengths[finger],
                self.geometry.contact_tip_world(pose, contact),
                scene.elbow_branches[finger],
                scene.joint_limits[2 * finger:2 * finger + 2],
            )
        return self._ik_cache[key]

    def solve_ik(self, pose: ObjectPose, contacts: Sequence[ContactPoint]) -> Optional[JointConfig]:
        """solve_grasp_ik mémorisée doigt par doigt (les frères ne diffèrent que d'un doigt)."""
        angles: List[float] = []
        for f, contact in enumerate(contacts):
            sol = self._finger_ik(pose, f, contact)
            if sol is None:
                return None
            angles.extend(sol)
        return JointConfig(tuple(angles))

    def links_collide(self, pose: ObjectPose, contacts: Sequence[ContactPoint], joints: JointConfig) -> bool:
        """links_collide mémorisée doigt par doigt."""
        for f, contact in enumerate(contacts):
            key = self._finger_key(pose, f, contact)
            hit = self._collision_cache.get(key)
            if hit is None:
                base, elbow, tip = link_points(self.scene.finger_bases[f], self.scene.link_lengths[f],
                                               joints.finger(f))
                hit = (self.geometry.segment_intersects(pose, base, elbow)
                       or self.geometry.segment_intersects(pose, elbow, tip))
                self._collision_cache[key] = bool(hit)
            if hit:
                return True
        return False

    def _statistics(self, rejections: Dict[str, int]) -> Dict[str, object]:
        return {"rejections": rejections, "closure_tests": self.closure_tests}

    def is_closed(self, contacts: Sequence[ContactPoint]) -> bool:
        """Fermeture de forme des contacts, mémorisée par ensemble d'abscisses."""
        key = self._closure_key(contacts)
        closed = self._closure_cache.get(key)
        if closed is None:
            self.closure_tests += 1
            closed = form_closure(REFERENCE_POSE, contacts, self.scene.friction_mu).is_closed
            self._closure_cache[key] = closed
        return closed

    def free_fingers(self, contacts: Sequence[ContactPoint]) -> List[int]:
        """Doigts libres d'une préhension fermée (mêmes résultats que grasp_analysis.free_fingers)."""
        if not self.is_closed(contacts):
            raise GraspAnalysisError("free_fingers requires a form-closed grasp")
        return [f for f in range(len(contacts))
                if self.is_closed([c for i, c in enumerate(contacts) if i != f])]

    def make_node(
        self,
        depth: int,
        pose: ObjectPose,
        contacts: Sequence[ContactPoint],
        parent: Optional[PlanNode] = None,
        switched_finger: Optional[int] = None,
        displacement: float = 0.0,
    ) -> PlanNode:
        joints = self.solve_ik(pose, contacts)
        return PlanNode(
            depth=depth,
            pose=pose,
            joints=joints,
            contacts=tuple(contacts),
            parent=parent,
            heuristic=distal_heuristic(self.scene, joints, self.params.nominal_distal_angle),
            switched_finger=switched_finger,
            displacement=displacement,
        )

    def initial_node(self, pose: ObjectPose, arc_lengths: Sequence[float]) -> PlanNode:
        contacts = [self.geometry.surface_point(s) for s in arc_lengths]
        return self.make_node(0, pose, contacts)

    def feasibility_cause(self, node: PlanNode) -> Optional[str]:
        """Raison de l'infaisabilité d'un noeud, None s'il est faisable."""
        if any(self.geometry.in_corner_margin(c.s) for c in node.contacts):
            return "contact inside a corner margin"
        joints = node.joints or self.solve_ik(node.pose, node.contacts)
        if joints is None:
            return "contact points are not reachable"
        if self.links_collide(node.pose, node.contacts, joints):
            return "finger links collide with the object"
        if not self.is_closed(node.contacts):
            return "grasp is not in frictional form closure"
        return None

    def is_feasible(self, node: PlanNode) -> bool:
        return self.feasibility_cause(node) is None

    def get_neighbors(self, node: PlanNode, next_pose: ObjectPose) -> List[PlanNode]:
        """Enfants: doigt libre × déplacement de D_cp, triés par heuristique puis |d|."""
        fingers = self.free_fingers(node.contacts)
        if not fingers:
            return []
        if not self.params.expand_all_free_fingers:
            fingers = fingers[:1]

        children: List[PlanNode] = []
        zero_done = False
        for finger in fingers:
            for d in self.params.displacements():
                if d == 0.0:
                    if zero_done:
                        continue
                    zero_done = True
                    children.append(self.make_node(node.depth + 1, next_pose, node.contacts, node))
                    continue
                moved = self.geometry.displace_contact(node.contacts[finger], d)
                if moved is None:
                    continue
                contacts = list(node.contacts)
                contacts[finger] = moved
                # les trois autres contacts sont fermés: tout sur-ensemble l'est aussi
                self._closure_cache.setdefault(self._closure_key(contacts), True)
                children.append(self.make_node(node.depth + 1, next_pose, contacts, node, finger, d))
        children.sort(key=lambda c: (c.heuristic, abs(c.displacement)))
        return children

    def plan(self, trajectory: Sequence[ObjectPose], initial_contacts: Sequence[float]) -> PlannerResult:
        """Algorithme de recherche: renvoie la séquence racine → but ou un échec avec statistiques."""
        params = self.params
        if len(trajectory) != params.sequence_length:
            raise PlannerError(
                f"trajectory has {len(trajectory)} poses, expected {params.sequence_length}"
            )
        started = time.perf_counter()
        root = self.initial_node(trajectory[0], initial_contacts)
        cause = self.feasibility_cause(root)
        if cause is not None:
            logger.warning(f"initial grasp infeasible: {cause}")
            return PlannerResult(SearchStatus.INFEASIBLE_START, cause=cause,
                                 search_time=time.perf_counter() - started)

        open_set = OpenSet()
        open_set.push(root)
        seen: Set[Tuple[int, Tuple[int, ...]]] = {(0, root.contact_key(params.duplicate_quantum))}
        closed: Set[Tuple[int, Tuple[int, ...]]] = set()
        expanded = 0
        generated = 1
        max_depth = 0
        rejections: Dict[str, int] = {}
        last = params.sequence_length - 1

        while len(open_set):
            node = open_set.pop()
            key = (node.depth, node.contact_key(params.duplicate_quantum))
            if key in closed:
                continue
            closed.add(key)
            if node is not root:
                cause = self.feasibility_cause(node)
                if cause is not None:
                    rejections[cause] = rejections.get(cause, 0) + 1
                    continue
            max_depth = max(max_depth, node.depth)
            if node.depth == last:
                sequence = ContactSequence(node.lineage())
                elapsed = time.perf_counter() - started
                logger.info(f"contact sequence found: {expanded} expansions, {elapsed:.3f}s")
                return PlannerResult(SearchStatus.SUCCESS, sequence, expanded, generated, max_depth,
                                     elapsed, statistics=self._statistics(rejections))
            if expanded >= params.max_expansions:
                elapsed = time.perf_counter() - started
                logger.warning(f"search budget of {params.max_expansions} expansions exhausted")
                return PlannerResult(SearchStatus.BUDGET_EXCEEDED, None, expanded, generated, max_depth,
                                     elapsed, cause="max_expansions reached",
                                     statistics=self._statistics(rejections))
            expanded += 1
            for child in self.get_neighbors(node, trajectory[node.depth + 1]):
                child_key = (child.depth, child.contact_key(params.duplicate_quantum))
                if child_key in seen:
                    continue
                seen.add(child_key)
                open_set.push(child)
                generated += 1

        elapsed = time.perf_counter() - started
        logger.warning(f"open set exhausted after {expanded} expansions (max depth {max_depth})")
        return PlannerResult(SearchStatus.EXHAUSTED, None, expanded, generated, max_depth, elapsed,
                             cause="open set exhausted", statistics=self._statistics(rejections))


def plan_contact_sequence(
    trajectory: Sequence[ObjectPose],
    initial_contacts: Sequence[float],
    params: SearchParams,
    scene: SceneConfig,
) -> PlannerResult:
    """Raccourci fonctionnel autour de ContactPlanner.plan."""
    return ContactPlanner(scene, params).plan(trajectory, initial_contacts)


def is_feasible(node: PlanNode, scene: SceneConfig) -> bool:
    return ContactPlanner(scene).is_feasible(node)


def get_neighbors(node: PlanNode, next_pose: ObjectPose, params: SearchParams, scene: SceneConfig) -> List[PlanNode]:
    return ContactPlanner(scene, params).get_neighbors(node, next_pose)
