"""
Domain Service: Simulator
Simulation planaire (objet rectangulaire + quatre doigts à deux segments) et contrôleur d'impédance
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from domain.entities import (
    N_DOF,
    N_FINGERS,
    N_JOINTS,
    ContactForces,
    ControllerGains,
    ExecutionReport,
    ObjectPose,
    SceneConfig,
    SimOptions,
    SimState,
    TrajectoryPlan,
)
from domain.services.kinematics import (
    RectangleGeometry,
    fk_jacobian,
    finger_joints,
    forward_kinematics,
    hand_gravity,
    wrap_angle,
)


N_GENERALIZED = N_DOF + N_JOINTS


class SimulationError(Exception):
    """Exception levée quand l'état simulé devient non fini"""
    pass


@dataclass
class ControlReference:
    """Consignes du contrôleur à un instant: positions/vitesses des bouts de doigts et forces monde"""
    tip_positions: np.ndarray
    tip_velocities: np.ndarray
    tip_forces: np.ndarray


@dataclass
class _ActiveContact:
    finger: int
    jacobian: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    penetration: float


def impedance_control(
    scene: SceneConfig,
    state: SimState,
    reference: ControlReference,
    gains: ControllerGains,
) -> np.ndarray:
    """τ_f = J_fᵀ(kp(p_ref − p) + kv(ṗ_ref − ṗ) + λ_ref) + g_hand."""
    tau = hand_gravity(scene, state.q)
    for f in range(N_FINGERS):
        joints = finger_joints(state.q, f)
        jac = fk_jacobian(scene.link_lengths[f], joints)
        tip = forward_kinematics(scene.finger_bases[f], scene.link_lengths[f], joints)
        tip_velocity = jac @ state.qd[2 * f:2 * f + 2]
        command = (gains.kp * (reference.tip_positions[f] - tip)
                   + gains.kv * (reference.tip_velocities[f] - tip_velocity)
                   + reference.tip_forces[f])
        tau[2 * f:2 * f + 2] += jac.T @ command
    return tau


def control_reference(
    scene: SceneConfig,
    geometry: RectangleGeometry,
    pose: np.ndarray,
    q: np.ndarray,
    qd: np.ndarray,
    lam: np.ndarray,
) -> ControlReference:
    """Consignes à partir d'un échantillon de plan; λ local est tourné dans le repère du contact de référence."""
    ref_pose = ObjectPose.from_array(pose)
    R = ref_pose.rotation()
    positions = np.zeros((N_FINGERS, 2))
    velocities = np.zeros((N_FINGERS, 2))
    forces = np.zeros((N_FINGERS, 2))
    for f in range(N_FINGERS):
        joints = finger_joints(q, f)
        positions[f] = forward_kinematics(scene.finger_bases[f], scene.link_lengths[f], joints)
        velocities[f] = fk_jacobian(scene.link_lengths[f], joints) @ qd[2 * f:2 * f + 2]
        frame = geometry.surface_frame(ref_pose, positions[f])
        forces[f] = lam[2 * f] * (R @ frame.normal_local) + lam[2 * f + 1] * (R @ frame.tangent_local)
    return ControlReference(positions, velocities, forces)


class Simulator:
    """
    Intégrateur kick–drift–kick à pas fixe.

    Chaque demi-kick prédit les vitesses avec l'amortissement de contact, la friction
    régularisée et l'amortissement articulaire implicites (système linéaire 11×11),
    puis applique les forces exactes (sans adhésion, friction bornée par μ·normale).
    """

    def __init__(self, scene: SceneConfig, options: Optional[SimOptions] = None):
        self.scene = scene
        self.options = options or SimOptions()
        self.geometry = RectangleGeometry(scene)
        self._mass = np.concatenate([
            np.diag(scene.object_mass_matrix()),
            np.full(N_JOINTS, scene.joint_inertia),
        ])

    def initial_state(self, pose: Sequence[float], q: Sequence[float]) -> SimState:
        return SimState(pose, np.zeros(N_DOF), q, np.zeros(N_JOINTS), 0.0)

    def _active_contacts(self, state: SimState) -> List[_ActiveContact]:
        pose = ObjectPose.from_array(state.pose)
        R = pose.rotation()
        active = []
        for f in range(N_FINGERS):
            joints = finger_joints(state.q, f)
            tip = forward_kinematics(self.scene.finger_bases[f], self.scene.link_lengths[f], joints)
            frame = self.geometry.surface_frame(pose, tip)
            if frame.phi >= 0.0:
                continue
            arm = R @ frame.closest_local
            # vitesse relative bout de doigt − point de l'objet
            A = np.zeros((2, N_GENERALIZED))
            A[:, 0:2] = -np.eye(2)
            A[:, 2] = [arm[1], -arm[0]]
            A[:, N_DOF + 2 * f:N_DOF + 2 * f + 2] = fk_jacobian(self.scene.link_lengths[f], joints)
            active.append(_ActiveContact(f, A, R @ frame.normal_local, R @ frame.tangent_local, -frame.phi))
        return active

    def _applied_forces(self, state: SimState, tau: np.ndarray) -> np.ndarray:
        forces = np.zeros(N_GENERALIZED)
        forces[1] = -self.scene.mass * self.scene.gravity
        forces[N_DOF:] = tau - hand_gravity(self.scene, state.q)
        return forces

    def _kick(self, state: SimState, velocity: np.ndarray, tau: np.ndarray, h: float) -> Tuple[np.ndarray, ContactForces]:
        opts = self.options
        mu = self.scene.friction_mu
        contacts = self._active_contacts(state)
        applied = self._applied_forces(state, tau)

        stiffness = np.zeros((N_GENERALIZED, N_GENERALIZED))
        stiffness[N_DOF:, N_DOF:] += self.scene.joint_damping * np.eye(N_JOINTS)
        explicit = applied.copy()
        drag = []
        for c in contacts:
            rel = c.jacobian @ velocity
            spring = opts.contact_stiffness * c.penetration
            predicted_normal = max(0.0, spring + opts.contact_damping * float(c.normal @ rel))
            vt = float(c.tangent @ rel)
            d = mu * predicted_normal / np.sqrt(vt * vt + opts.friction_velocity ** 2)
            drag.append(d)
            C = opts.contact_damping * np.outer(c.normal, c.normal) + d * np.outer(c.tangent, c.tangent)
            stiffness += c.jacobian.T @ C @ c.jacobian
            explicit -= c.jacobian.T @ (spring * c.normal)

        predicted = np.linalg.solve(np.diag(self._mass) + h * stiffness, self._mass * velocity + h * explicit)

        normal = np.zeros(N_FINGERS)
        tangential = np.zeros(N_FINGERS)
        flags = np.zeros(N_FINGERS, dtype=bool)
        total = applied.copy()
        total[N_DOF:] -= self.scene.joint_damping * predicted[N_DOF:]
        for c, d in zip(contacts, drag):
            rel = c.jacobian @ predicted
            fn = max(0.0, opts.contact_stiffness * c.penetration + opts.contact_damping * float(c.normal @ rel))
            ft = float(np.clip(d * float(c.tangent @ rel), -mu * fn, mu * fn))
            total -= c.jacobian.T @ (fn * c.normal + ft * c.tangent)
            normal[c.finger] = fn
            tangential[c.finger] = ft
            flags[c.finger] = fn > 0.0
        return velocity + h * total / self._mass, ContactForces(normal, tangential, flags)

    def step(self, state: SimState, tau: Sequence[float], dt: Optional[float] = None) -> Tuple[SimState, ContactForces]:
        """Avance d'un pas; lève SimulationError si l'état devient non fini."""
        dt = self.options.dt if dt is None else dt
        if dt > 1e-3 + 1e-15:
            raise SimulationError(f"simulation step {dt} exceeds 1 ms")
        tau = np.asarray(tau, dtype=float).reshape(N_JOINTS)
        velocity = np.concatenate([state.twist, state.qd])
        half, _ = self._kick(state, velocity, tau, 0.5 * dt)
        drifted = SimState(
            state.pose + dt * half[:N_DOF],
            half[:N_DOF],
            state.q + dt * half[N_DOF:],
            half[N_DOF:],
            state.t + dt,
        )
        final, forces = self._kick(drifted, half, tau, 0.5 * dt)
        result = SimState(drifted.pose, final[:N_DOF], drifted.q, final[N_DOF:], drifted.t)
        if not result.is_finite():
            raise SimulationError(f"non-finite state at t={result.t:.4f}s (pose={result.pose}, twist={result.twist})")
        return result, forces

    def execute_plan(self, plan: TrajectoryPlan, gains: Optional[ControllerGains] = None) -> ExecutionReport:
        """
        Exécute un plan avec le contrôleur d'impédance.

        Les consignes sont interpolées linéairement sur la grille du plan. L'exécution
        s'arrête à la première tick où |erreur en y| dépasse le seuil de chute.
        """
        gains = gains or ControllerGains()
        opts = self.options
        ticks = int(round(plan.duration / opts.dt))
        state = self.initial_state(plan.x[0], plan.q[0])

        times, errors, poses, refs = [], [], [], []
        normal, tangential, flags = [], [], []
        dropped = False
        drop_time = float("nan")
        for _ in range(ticks):
            ref = plan.sample(state.t)
            reference = control_reference(self.scene, self.geometry, ref["x"], ref["q"], ref["qd"], ref["lam"])
            tau = impedance_control(self.scene, state, reference, gains)
            state, forces = self.step(state, tau)
            target = plan.sample(state.t)
            if opts.follow_reference:
                state = SimState(target["x"], target["xd"], target["q"], target["qd"], state.t)
            error = state.pose - target["x"]
            error[2] = wrap_angle(error[2])
            times.append(state.t)
            errors.append(error)
            poses.append(state.pose.copy())
            refs.append(target["x"])
            normal.append(forces.normal)
            tangential.append(forces.tangential)
            flags.append(forces.active)
            if abs(error[1]) > opts.drop_threshold:
                dropped = True
                drop_time = state.t
                logger.info(f"object dropped at t={state.t:.3f}s (y error {error[1]:+.3f} m)")
                break

        errors_arr = np.array(errors).reshape(-1, N_DOF)
        mae = np.mean(np.abs(errors_arr), axis=0) if errors else np.zeros(N_DOF)
        return ExecutionReport(
            times=np.array(times),
            pose_error=errors_arr,
            mae=mae,
            dropped=dropped,
            drop_time=drop_time,
            normal_forces=np.array(normal).reshape(-1, N_FINGERS),
            tangential_forces=np.array(tangential).reshape(-1, N_FINGERS),
            contact_flags=np.array(flags, dtype=bool).reshape(-1, N_FINGERS),
            poses=np.array(poses).reshape(-1, N_DOF),
            reference_poses=np.array(refs).reshape(-1, N_DOF),
            final_state=state,
        )


def step(scene: SceneConfig, state: SimState, tau: Sequence[float], options: Optional[SimOptions] = None) -> SimState:
    return Simulator(scene, options).step(state, tau)[0]


def execute_plan(
    plan: TrajectoryPlan,
    scene: SceneConfig,
    gains: Optional[ControllerGains] = None,
    options: Optional[SimOptions] = None,
) -> ExecutionReport:
    return Simulator(scene, options).execute_plan(plan, gains)


def max_contact_changes_per_segment(report: ExecutionReport, segment_duration: float) -> int:
    """Nombre maximal de doigts dont l'état de contact bascule à l'intérieur d'un même segment."""
    if report.times.size < 2 or segment_duration <= 0:
        return 0
    segment = np.floor((report.times - 1e-9) / segment_duration).astype(int)
    flags = report.contact_flags
    worst = 0
    for s in np.unique(segment):
        rows = flags[segment == s]
        if rows.shape[0] < 2:
            continue
        toggled = np.any(rows[1:] != rows[:-1], axis=0)
        worst = max(worst, int(np.sum(toggled)))
    return worst
