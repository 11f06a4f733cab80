"""
Domain Service: CITO Builder
Transcription par collocation trapézoïdale de l'optimisation de trajectoire à contacts implicites

Trois variantes: CITO générale (complémentarités relâchées partout), CITO initialisée par
le plan, et CITO de transition (contacts épinglés selon la séquence du planificateur).
Les expressions sont construites avec casadi (SX), qui fournit gradients et jacobiennes
creuses exacts; le solveur ne voit que des fonctions numpy/scipy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import casadi as ca
import numpy as np
from loguru import logger
from scipy import sparse

from domain.entities import (
    N_DOF,
    N_FINGERS,
    N_FORCES,
    N_JOINTS,
    CitoOptions,
    ContactSequence,
    CostWeights,
    JointConfig,
    NlpProblem,
    ObjectPose,
    PlanNode,
    SceneConfig,
    SegmentSchedule,
    TrajectoryPlan,
    VariableLayout,
)
from domain.services.grasp_analysis import balancing_forces
from domain.services.kinematics import RectangleGeometry, hand_gravity, hand_jacobian


STATIC_EQUILIBRIUM = "static-equilibrium"
PLAN_WARM_START = "plan-warm-start"


class CitoBuildError(Exception):
    """Exception pour les problèmes de trajectoire incohérents"""
    pass


# ---------------------------------------------------------------------------
# Expressions symboliques
# ---------------------------------------------------------------------------

def _stack(rows: List) -> ca.SX:
    return ca.vertcat(*rows) if rows else ca.SX(0, 1)


def _finger_kinematics(scene: SceneConfig, f: int, q: ca.SX) -> Tuple[ca.SX, ca.SX]:
    """Position du bout de doigt et jacobienne 2×2."""
    l1, l2 = scene.link_lengths[f]
    bx, by = scene.finger_bases[f]
    q1, q2 = q[2 * f], q[2 * f + 1]
    c1, s1 = ca.cos(q1), ca.sin(q1)
    c12, s12 = ca.cos(q1 + q2), ca.sin(q1 + q2)
    tip = ca.vertcat(bx + l1 * c1 + l2 * c12, by + l1 * s1 + l2 * s12)
    jac = ca.vertcat(
        ca.horzcat(-l1 * s1 - l2 * s12, -l2 * s12),
        ca.horzcat(l1 * c1 + l2 * c12, l2 * c12),
    )
    return tip, jac


def _hand_gravity_sx(scene: SceneConfig, q: ca.SX) -> ca.SX:
    m1, m2 = scene.link_masses
    g = scene.gravity
    rows = []
    for f in range(N_FINGERS):
        l1, l2 = scene.link_lengths[f]
        c1, c12 = ca.cos(q[2 * f]), ca.cos(q[2 * f] + q[2 * f + 1])
        rows.append(g * ((0.5 * m1 * l1 + m2 * l1) * c1 + 0.5 * m2 * l2 * c12))
        rows.append(g * 0.5 * m2 * l2 * c12)
    return ca.vertcat(*rows)


@dataclass
class _FingerTerms:
    tip_local: ca.SX
    phi: ca.SX
    vn: ca.SX
    vt: ca.SX
    wrench: ca.SX
    joint_torque: ca.SX


def _finger_terms(scene: SceneConfig, f: int, x: ca.SX, xd: ca.SX, q: ca.SX, qd: ca.SX, lam: ca.SX) -> _FingerTerms:
    """
    Repère de contact issu du champ de distance signée du bout de doigt.

    Le point d'application est le point du rectangle le plus proche, la normale entrante
    l'opposé du gradient de distance; φ inclut le rayon du bout de doigt.
    """
    hx, hy = scene.half_extents
    tip, jac = _finger_kinematics(scene, f, q)
    c, s = ca.cos(x[2]), ca.sin(x[2])
    d0, d1 = tip[0] - x[0], tip[1] - x[1]
    r0 = c * d0 + s * d1
    r1 = -s * d0 + c * d1
    k0 = ca.fmin(ca.fmax(r0, -hx), hx)
    k1 = ca.fmin(ca.fmax(r1, -hy), hy)
    e0, e1 = r0 - k0, r1 - k1
    sq = e0 * e0 + e1 * e1
    outside = sq > 1e-24
    dist = ca.sqrt(ca.fmax(sq, 1e-24))
    pen_x, pen_y = hx - ca.fabs(r0), hy - ca.fabs(r1)
    side_x = pen_x <= pen_y
    sdf = ca.if_else(outside, dist, -ca.fmin(pen_x, pen_y))
    out0 = ca.if_else(outside, e0 / dist, ca.if_else(side_x, ca.sign(r0), 0.0))
    out1 = ca.if_else(outside, e1 / dist, ca.if_else(side_x, 0.0, ca.sign(r1)))

    n_loc = ca.vertcat(-out0, -out1)
    t_loc = ca.vertcat(n_loc[1], -n_loc[0])
    rot = ca.vertcat(ca.horzcat(c, -s), ca.horzcat(s, c))
    n_w = ca.mtimes(rot, n_loc)
    t_w = ca.mtimes(rot, t_loc)
    arm = ca.mtimes(rot, ca.vertcat(k0, k1))

    lam_n, lam_t = lam[2 * f], lam[2 * f + 1]
    force = lam_n * n_w + lam_t * t_w
    wrench = ca.vertcat(force[0], force[1], arm[0] * force[1] - arm[1] * force[0])

    qd_f = ca.vertcat(qd[2 * f], qd[2 * f + 1])
    v_tip = ca.mtimes(jac, qd_f)
    v_point = ca.vertcat(xd[0] - xd[2] * arm[1], xd[1] + xd[2] * arm[0])
    rel = v_tip - v_point
    return _FingerTerms(
        tip_local=ca.vertcat(r0, r1),
        phi=sdf - scene.fingertip_radius,
        vn=ca.dot(n_w, rel),
        vt=ca.dot(t_w, rel),
        wrench=wrench,
        joint_torque=ca.mtimes(jac.T, force),
    )


def _to_csr(matrix: ca.DM) -> sparse.csr_matrix:
    colind, row = matrix.sparsity().get_ccs()
    data = np.asarray(matrix.nonzeros(), dtype=float)
    return sparse.csc_matrix((data, np.asarray(row, dtype=int), np.asarray(colind, dtype=int)),
                             shape=matrix.shape).tocsr()


# ---------------------------------------------------------------------------
# Transcription
# ---------------------------------------------------------------------------

@dataclass
class _Pin:
    knot: int
    finger: int
    target: np.ndarray


def incremental_pose_targets(poses: Sequence[ObjectPose], segment_steps: int) -> List[Tuple[int, np.ndarray]]:
    """Paires (noeud, x*_n): le segment n−1 suit x*_n sur ses M̂+1 noeuds, extrémités comprises."""
    pairs = []
    for n in range(1, len(poses)):
        target = poses[n].as_array()
        for k in range(segment_steps + 1):
            pairs.append(((n - 1) * segment_steps + k, target))
    return pairs


def _transcribe(
    scene: SceneConfig,
    options: CitoOptions,
    weights: CostWeights,
    knots: int,
    dt: float,
    tracking: Sequence[Tuple[int, np.ndarray]],
    complementarity: np.ndarray,
    pins: Sequence[_Pin],
    fixed: Dict[Tuple[str, int], np.ndarray],
    kind: str,
) -> NlpProblem:
    layout = VariableLayout()
    for name, width in (("x", N_DOF), ("xd", N_DOF), ("q", N_JOINTS), ("qd", N_JOINTS),
                        ("tau", N_JOINTS), ("lam", N_FORCES), ("gamma", N_FINGERS)):
        layout.add(name, (knots, width))
    if pins:
        layout.add("sigma", (len(pins),))
    n = layout.size
    z = ca.SX.sym("z", n)

    def block(name: str, k: int) -> ca.SX:
        start, shape = layout.blocks[name]
        width = shape[1]
        return z[start + k * width:start + (k + 1) * width]

    # Bornes de chemin
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for k in range(knots):
        sl = layout.slice("q")
        base = sl.start + k * N_JOINTS
        lower[base:base + N_JOINTS] = scene.lower_joint_limits()
        upper[base:base + N_JOINTS] = scene.upper_joint_limits()
        base = layout.slice("tau").start + k * N_JOINTS
        lower[base:base + N_JOINTS] = -options.torque_limit
        upper[base:base + N_JOINTS] = options.torque_limit
        base = layout.slice("lam").start + k * N_FORCES
        lower[base:base + N_FORCES:2] = 0.0
        upper[base:base + N_FORCES:2] = options.normal_force_limit
        lower[base + 1:base + N_FORCES:2] = -options.tangential_force_limit
        upper[base + 1:base + N_FORCES:2] = options.tangential_force_limit
    lower[layout.slice("gamma")] = 0.0
    if pins:
        lower[layout.slice("sigma")] = 0.0
    for (name, k), value in fixed.items():
        start, shape = layout.blocks[name]
        idx = slice(start + k * shape[1], start + (k + 1) * shape[1])
        value = np.asarray(value, dtype=float)
        if np.any(value < lower[idx] - 1e-12) or np.any(value > upper[idx] + 1e-12):
            raise CitoBuildError(f"boundary value for {name}[{k}] violates its path bounds")
        lower[idx] = value
        upper[idx] = value

    # Termes par noeud et par doigt
    terms: List[List[_FingerTerms]] = []
    for k in range(knots):
        xk, xdk, qk, qdk, lamk = (block(b, k) for b in ("x", "xd", "q", "qd", "lam"))
        terms.append([_finger_terms(scene, f, xk, xdk, qk, qdk, lamk) for f in range(N_FINGERS)])

    gravity = ca.DM(scene.gravity_wrench())
    mass_obj = ca.DM(scene.object_mass_matrix())

    def object_force(k: int) -> ca.SX:
        total = gravity
        for term in terms[k]:
            total = total + term.wrench
        return total

    def hand_force(k: int) -> ca.SX:
        qk = block("q", k)
        contact = ca.vertcat(*[terms[k][f].joint_torque for f in range(N_FINGERS)])
        return block("tau", k) - contact - _hand_gravity_sx(scene, qk)

    eq_rows: Dict[str, List[ca.SX]] = {}
    if knots == 1:
        eq_rows["object_dynamics"] = [object_force(0)]
        eq_rows["hand_dynamics"] = [hand_force(0)]
    else:
        half = 0.5 * dt
        forces_obj = [object_force(k) for k in range(knots)]
        forces_hand = [hand_force(k) for k in range(knots)]
        obj_dyn, hand_dyn, obj_kin, hand_kin = [], [], [], []
        for k in range(knots - 1):
            obj_dyn.append(ca.mtimes(mass_obj, block("xd", k + 1) - block("xd", k))
                           - half * (forces_obj[k] + forces_obj[k + 1]))
            hand_dyn.append(scene.joint_inertia * (block("qd", k + 1) - block("qd", k))
                            - half * (forces_hand[k] + forces_hand[k + 1]))
            obj_kin.append(block("x", k + 1) - block("x", k) - half * (block("xd", k) + block("xd", k + 1)))
            hand_kin.append(block("q", k + 1) - block("q", k) - half * (block("qd", k) + block("qd", k + 1)))
        eq_rows.update(object_dynamics=obj_dyn, hand_dynamics=hand_dyn,
                       object_kinematics=obj_kin, hand_kinematics=hand_kin)

    mu = scene.friction_mu
    ineq_rows: Dict[str, List[ca.SX]] = {
        "friction_cone": [], "non_penetration": [], "normal_complementarity": [],
        "sliding_complementarity": [], "contact_pinning": [],
    }
    for k in range(knots):
        lamk = block("lam", k)
        gam = block("gamma", k)
        for f in range(N_FINGERS):
            lam_n, lam_t = lamk[2 * f], lamk[2 * f + 1]
            term = terms[k][f]
            ineq_rows["friction_cone"].append(ca.vertcat(mu * lam_n - lam_t, mu * lam_n + lam_t))
            ineq_rows["non_penetration"].append(term.phi)
            if complementarity[k, f]:
                ineq_rows["normal_complementarity"].append(gam[f] - term.phi * lam_n)
                ineq_rows["sliding_complementarity"].append(ca.vertcat(
                    gam[f] - term.vn * lam_n, gam[f] + term.vn * lam_n,
                    gam[f] - term.vt * lam_n, gam[f] + term.vt * lam_n,
                ))
    if pins:
        sigma = z[layout.slice("sigma")]
        for i, pin in enumerate(pins):
            err = terms[pin.knot][pin.finger].tip_local - ca.DM(pin.target)
            ineq_rows["contact_pinning"].append(ca.vertcat(
                sigma[i] - err[0], sigma[i] + err[0], sigma[i] - err[1], sigma[i] + err[1],
            ))

    # Coût
    cost = ca.SX(0)
    Q = ca.DM(weights.q_matrix())
    for k, target in tracking:
        e = block("x", k) - ca.DM(target)
        cost += ca.mtimes([e.T, Q, e])
    for k in range(knots):
        tau, lam = block("tau", k), block("lam", k)
        cost += weights.torque * ca.dot(tau, tau) + weights.force * ca.dot(lam, lam)
    cost += weights.slack * ca.sum1(z[layout.slice("gamma")])
    if pins:
        cost += weights.slack * ca.sum1(z[layout.slice("sigma")])

    eq_expr, eq_blocks = _assemble(eq_rows)
    ineq_expr, ineq_blocks = _assemble(ineq_rows)

    f_cost = ca.Function("cito_cost", [z], [cost, ca.gradient(cost, z)])
    f_eq = ca.Function("cito_eq", [z], [eq_expr])
    f_eq_jac = ca.Function("cito_eq_jac", [z], [ca.jacobian(eq_expr, z)])
    f_ineq = ca.Function("cito_ineq", [z], [ineq_expr])
    f_ineq_jac = ca.Function("cito_ineq_jac", [z], [ca.jacobian(ineq_expr, z)])

    phi = ca.vertcat(*[terms[k][f].phi for k in range(knots) for f in range(N_FINGERS)])
    vn = ca.vertcat(*[terms[k][f].vn for k in range(knots) for f in range(N_FINGERS)])
    vt = ca.vertcat(*[terms[k][f].vt for k in range(knots) for f in range(N_FINGERS)])
    pin_err = _stack([terms[p.knot][p.finger].tip_local - ca.DM(p.target) for p in pins])
    f_terms = ca.Function("cito_terms", [z], [phi, vn, vt, pin_err])

    m_eq = int(eq_expr.size1())
    m_ineq = int(ineq_expr.size1())

    def objective(v: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = f_cost(v)
        return float(value), grad.full().ravel()

    def contact_terms(v: np.ndarray) -> Dict[str, np.ndarray]:
        p, a, b, e = f_terms(v)
        return {
            "phi": p.full().reshape(knots, N_FINGERS),
            "vn": a.full().reshape(knots, N_FINGERS),
            "vt": b.full().reshape(knots, N_FINGERS),
            "pin_error": e.full().reshape(-1, 2) if pins else np.zeros((0, 2)),
        }

    logger.debug(f"{kind} CITO: {n} variables, {m_eq} equalities, {m_ineq} inequalities")
    return NlpProblem(
        n=n,
        lower=lower,
        upper=upper,
        objective=objective,
        eq=lambda v: f_eq(v).full().ravel(),
        eq_jacobian=lambda v: _to_csr(f_eq_jac(v)),
        ineq=lambda v: f_ineq(v).full().ravel(),
        ineq_jacobian=lambda v: _to_csr(f_ineq_jac(v)),
        m_eq=m_eq,
        m_ineq=m_ineq,
        eq_blocks=eq_blocks,
        ineq_blocks=ineq_blocks,
        layout=layout,
        metadata={
            "kind": kind,
            "knots": knots,
            "dt": dt,
            "complementarity": complementarity.copy(),
            "pins": [(p.knot, p.finger) for p in pins],
            "contact_terms": contact_terms,
        },
    )


def _assemble(rows: Dict[str, List[ca.SX]]) -> Tuple[ca.SX, Dict[str, slice]]:
    parts, blocks, offset = [], {}, 0
    for name, items in rows.items():
        expr = _stack(items)
        size = int(expr.size1())
        if size == 0:
            continue
        blocks[name] = slice(offset, offset + size)
        offset += size
        parts.append(expr)
    return _stack(parts), blocks


# ---------------------------------------------------------------------------
# Constructeurs publics
# ---------------------------------------------------------------------------

def build_general_cito(
    scene: SceneConfig,
    start: ObjectPose,
    start_joints: JointConfig,
    goal: ObjectPose,
    M: int,
    dt: float,
    weights: CostWeights,
    init: TrajectoryPlan,
    *,
    options: Optional[CitoOptions] = None,
    pose_targets: Optional[Sequence[Tuple[int, np.ndarray]]] = None,
) -> NlpProblem:
    """
    CITO générale: complémentarités relâchées sur tous les noeuds et doigts.

    Args:
        pose_targets: Paires (noeud, cible) remplaçant le suivi de x_goal sur tout l'horizon
    """
    options = options or CitoOptions(dt=dt)
    if M < 0:
        raise CitoBuildError("horizon M must be non-negative")
    if init.knots != M + 1:
        raise CitoBuildError(f"initial trajectory has {init.knots} knots, expected {M + 1}")
    knots = M + 1
    tracking = list(pose_targets) if pose_targets is not None else [(k, goal.as_array()) for k in range(knots)]
    if any(k < 0 or k >= knots for k, _ in tracking):
        raise CitoBuildError("pose target outside the horizon")
    fixed = {("x", 0): start.as_array(), ("q", 0): start_joints.as_array(),
             ("xd", 0): np.zeros(N_DOF), ("qd", 0): np.zeros(N_JOINTS)}
    problem = _transcribe(scene, options, weights, knots, dt, tracking,
                          np.ones((knots, N_FINGERS), dtype=bool), [], fixed, "general")
    problem.initial = pack_plan(problem, init)
    return problem


def build_transition_cito(
    scene: SceneConfig,
    sequence: ContactSequence,
    segment_steps: int,
    dt: float,
    weights: CostWeights,
    *,
    options: Optional[CitoOptions] = None,
    init: Optional[TrajectoryPlan] = None,
) -> NlpProblem:
    """
    CITO de transition (séquence de contacts imposée).

    Horizon M = (N−1)·M̂. Sur le segment s, les doigts fixes sont épinglés sur tous les
    noeuds sM̂..(s+1)M̂−1; le doigt libre n'est épinglé qu'au premier et au dernier noeud
    (contact de départ puis d'arrivée) et reste soumis aux complémentarités entre les deux.
    Le noeud final M prolonge le dernier segment avec tous les doigts sur leurs contacts d'arrivée.
    """
    options = options or CitoOptions(segment_steps=segment_steps, dt=dt)
    geometry = RectangleGeometry(scene)
    nodes = sequence.nodes
    for node in nodes:
        if not node.joints.within_limits(scene):
            raise CitoBuildError(f"node {node.depth} joints violate the joint limits")
    segments = sequence.segment_count
    knots = segments * segment_steps + 1
    schedule = sequence.switch_schedule()

    complementarity = np.zeros((knots, N_FINGERS), dtype=bool)
    pins: List[_Pin] = []
    fixed: Dict[Tuple[str, int], np.ndarray] = {
        ("x", 0): nodes[0].pose.as_array(),
        ("q", 0): nodes[0].joints.as_array(),
    }
    for s in range(segments):
        first, last = s * segment_steps, (s + 1) * segment_steps - 1
        free = schedule[s]
        for f in range(N_FINGERS):
            start_tip = geometry.contact_tip_local(nodes[s].contacts[f])
            end_tip = geometry.contact_tip_local(nodes[s + 1].contacts[f])
            if f == free:
                pins.append(_Pin(first, f, start_tip))
                pins.append(_Pin(last, f, end_tip))
                complementarity[first + 1:last, f] = True
            else:
                pins.extend(_Pin(k, f, start_tip) for k in range(first, last + 1))
        for k in (first, last):
            fixed[("xd", k)] = np.zeros(N_DOF)
            fixed[("qd", k)] = np.zeros(N_JOINTS)
    final = knots - 1
    for f in range(N_FINGERS):
        pins.append(_Pin(final, f, geometry.contact_tip_local(nodes[-1].contacts[f])))

    tracking = incremental_pose_targets(sequence.poses, segment_steps)
    problem = _transcribe(scene, options, weights, knots, dt, tracking, complementarity, pins, fixed, "transition")
    problem.metadata["schedule"] = [
        SegmentSchedule(s, schedule[s], nodes[s].arc_lengths(), nodes[s + 1].arc_lengths())
        for s in range(segments)
    ]
    if init is not None:
        problem.initial = pack_plan(problem, init)
    return problem


# ---------------------------------------------------------------------------
# Conditions initiales et extraction
# ---------------------------------------------------------------------------

def _node_forces(scene: SceneConfig, node: PlanNode) -> np.ndarray:
    lam = balancing_forces(node.pose, node.contacts, scene.friction_mu, scene.gravity_wrench())
    if lam is None:
        logger.warning(f"no gravity-balancing forces at node {node.depth}; using zero forces")
        return np.zeros(N_FORCES)
    return lam


def _node_torques(scene: SceneConfig, node: PlanNode, pose: ObjectPose, q: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return hand_jacobian(scene, pose, q, node.contacts).T @ lam + hand_gravity(scene, q)


def initial_guess(
    kind: str,
    scene: SceneConfig,
    M: int,
    dt: float,
    *,
    sequence: Optional[ContactSequence] = None,
    start: Optional[PlanNode] = None,
) -> TrajectoryPlan:
    """
    Trajectoire initiale.

    static-equilibrium: pose et articulations constantes (premier noeud de la séquence ou
    `start`), forces équilibrant la gravité, τ = Jᵀλ + g_hand, vitesses nulles.
    plan-warm-start: x, q, λ affines par morceaux entre les noeuds de la séquence.
    """
    knots = M + 1
    if kind == STATIC_EQUILIBRIUM:
        node = sequence.nodes[0] if sequence is not None else start
        if node is None or node.joints is None:
            raise CitoBuildError("static-equilibrium guess needs a start node with joints")
        lam = _node_forces(scene, node)
        q = node.joints.as_array()
        tau = _node_torques(scene, node, node.pose, q, lam)
        return TrajectoryPlan(
            dt=dt,
            x=np.tile(node.pose.as_array(), (knots, 1)),
            xd=np.zeros((knots, N_DOF)),
            q=np.tile(q, (knots, 1)),
            qd=np.zeros((knots, N_JOINTS)),
            tau=np.tile(tau, (knots, 1)),
            lam=np.tile(lam, (knots, 1)),
            gamma=np.zeros((knots, N_FINGERS)),
            kind="guess",
        )
    if kind != PLAN_WARM_START:
        raise CitoBuildError(f"unknown initial guess kind {kind!r}")
    if sequence is None:
        raise CitoBuildError("plan-warm-start needs a contact sequence")
    segments = sequence.segment_count
    if segments == 0 or M % segments:
        raise CitoBuildError(f"horizon {M} is not a multiple of the {segments} segments")
    steps = M // segments
    node_lam = [_node_forces(scene, node) for node in sequence.nodes]
    x = np.zeros((knots, N_DOF))
    q = np.zeros((knots, N_JOINTS))
    lam = np.zeros((knots, N_FORCES))
    tau = np.zeros((knots, N_JOINTS))
    for k in range(knots):
        s = min(k // steps, segments - 1)
        alpha = (k - s * steps) / steps
        a, b = sequence.nodes[s], sequence.nodes[s + 1]
        x[k] = (1 - alpha) * a.pose.as_array() + alpha * b.pose.as_array()
        q[k] = (1 - alpha) * a.joints.as_array() + alpha * b.joints.as_array()
        lam[k] = (1 - alpha) * node_lam[s] + alpha * node_lam[s + 1]
        frame_node = b if alpha >= 1.0 else a
        tau[k] = _node_torques(scene, frame_node, ObjectPose.from_array(x[k]), q[k], lam[k])
    return TrajectoryPlan(
        dt=dt, x=x, xd=np.zeros((knots, N_DOF)), q=q, qd=np.zeros((knots, N_JOINTS)),
        tau=tau, lam=lam, gamma=np.zeros((knots, N_FINGERS)), kind="guess",
    )


def pack_plan(problem: NlpProblem, plan: TrajectoryPlan) -> np.ndarray:
    """
    Vecteur de décision correspondant à une trajectoire.

    Les slacks γ et σ sont relevés au minimum qui satisfait les complémentarités et
    l'épinglage; le vecteur est ensuite projeté dans les bornes.
    """
    layout = problem.layout
    if plan.knots != problem.metadata["knots"]:
        raise CitoBuildError(f"trajectory has {plan.knots} knots, problem expects {problem.metadata['knots']}")
    z = np.zeros(problem.n)
    for name in ("x", "xd", "q", "qd", "tau", "lam", "gamma"):
        z[layout.slice(name)] = getattr(plan, name).ravel()
    z = np.clip(z, problem.lower, problem.upper)

    terms = problem.metadata["contact_terms"](z)
    lam_n = layout.view(z, "lam")[:, 0::2]
    needed = np.maximum.reduce([terms["phi"] * lam_n, np.abs(terms["vn"] * lam_n), np.abs(terms["vt"] * lam_n)])
    needed = np.where(problem.metadata["complementarity"], np.maximum(needed, 0.0), 0.0)
    gamma = np.maximum(layout.view(z, "gamma"), needed)
    z[layout.slice("gamma")] = gamma.ravel()
    if "sigma" in layout.blocks:
        z[layout.slice("sigma")] = np.max(np.abs(terms["pin_error"]), axis=1)
    return np.clip(z, problem.lower, problem.upper)


def plan_from_solution(problem: NlpProblem, z: np.ndarray) -> TrajectoryPlan:
    layout = problem.layout
    view = {name: layout.view(z, name).copy() for name in ("x", "xd", "q", "qd", "tau", "lam", "gamma")}
    view["gamma"] = np.maximum(view["gamma"], 0.0)
    return TrajectoryPlan(
        dt=problem.metadata["dt"],
        pin_slack=layout.view(z, "sigma").copy() if "sigma" in layout.blocks else np.zeros(0),
        kind=problem.metadata["kind"],
        schedule=list(problem.metadata.get("schedule", [])),
        **view,
    )


def solution_residuals(problem: NlpProblem, z: np.ndarray) -> Dict[str, float]:
    """Violations par bloc plus le résidu de complémentarité φ·λn − max γ."""
    report = problem.block_violations(z)
    terms = problem.metadata["contact_terms"](z)
    lam_n = problem.layout.view(z, "lam")[:, 0::2]
    gamma_max = float(np.max(problem.layout.view(z, "gamma"))) if z.size else 0.0
    report["complementarity_product"] = float(np.max(terms["phi"] * lam_n) - gamma_max)
    fixed = problem.lower == problem.upper
    report["boundary"] = float(np.max(np.abs(z[fixed] - problem.lower[fixed]))) if np.any(fixed) else 0.0
    return report
