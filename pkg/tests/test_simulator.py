import math

import numpy as np
import pytest

from domain.entities import (
    ControllerGains,
    ExecutionReport,
    ObjectPose,
    SimOptions,
    SimState,
    TrajectoryPlan,
    default_scene,
)
from domain.services.cito_builder import STATIC_EQUILIBRIUM, initial_guess
from domain.services.contact_planner import ContactPlanner
from domain.services.kinematics import fingertip_positions, hand_gravity
from domain.services.simulator import (
    ControlReference,
    SimulationError,
    Simulator,
    control_reference,
    impedance_control,
    max_contact_changes_per_segment,
)

# doigts tendus vers le haut (haut) ou vers le bas (bas), loin de l'objet
OPEN_HAND = np.array([math.pi / 2, 0.0, math.pi / 2, 0.0, -math.pi / 2, 0.0, -math.pi / 2, 0.0])


@pytest.fixture
def scene():
    return default_scene()


@pytest.fixture
def simulator(scene):
    return Simulator(scene, SimOptions())


def held_plan(scene, M=2, dt=0.1):
    planner = ContactPlanner(scene)
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    return initial_guess(STATIC_EQUILIBRIUM, scene, M, dt, start=root)


def open_hand_plan(scene, duration=0.3, dt=0.1):
    knots = int(round(duration / dt)) + 1
    return TrajectoryPlan(
        dt=dt,
        x=np.tile(scene.start_pose.as_array(), (knots, 1)),
        xd=np.zeros((knots, 3)),
        q=np.tile(OPEN_HAND, (knots, 1)),
        qd=np.zeros((knots, 8)),
        tau=np.zeros((knots, 8)),
        lam=np.zeros((knots, 8)),
        gamma=np.zeros((knots, 4)),
    )


def mechanical_energy(scene, simulator, state):
    """Énergie de l'objet, cinétique de la main et ressorts de contact (gravité de la main compensée)."""
    energy = 0.5 * scene.mass * float(state.twist[:2] @ state.twist[:2])
    energy += 0.5 * scene.object_inertia * state.twist[2] ** 2
    energy += scene.mass * scene.gravity * state.pose[1]
    energy += 0.5 * scene.joint_inertia * float(state.qd @ state.qd)
    pose = ObjectPose.from_array(state.pose)
    for tip in fingertip_positions(scene, state.q):
        phi = simulator.geometry.signed_distance(pose, tip)
        if phi < 0:
            energy += 0.5 * simulator.options.contact_stiffness * phi ** 2
    return energy


def test_free_fall_matches_closed_form(scene, simulator):
    state = simulator.initial_state(scene.start_pose.as_array(), OPEN_HAND)
    for _ in range(100):
        state, forces = simulator.step(state, hand_gravity(scene, state.q))
        assert not forces.active.any()
    expected = -0.5 * scene.gravity * state.t ** 2
    assert state.pose[1] == pytest.approx(expected, abs=1e-9)
    assert state.twist[1] == pytest.approx(-scene.gravity * state.t, abs=1e-9)
    assert state.pose[0] == 0.0 and state.pose[2] == 0.0


def test_gravity_compensation_keeps_the_hand_still(scene, simulator):
    q0 = np.array([0.5, 0.3, 2.6, -0.3, -0.5, -0.3, -2.6, 0.3])
    state = simulator.initial_state([5.0, 5.0, 0.0], q0)
    for _ in range(100):
        state, _ = simulator.step(state, hand_gravity(scene, state.q))
    assert state.q == pytest.approx(q0, abs=1e-9)
    assert state.qd == pytest.approx(np.zeros(8), abs=1e-9)


def test_mechanical_energy_does_not_grow(scene, simulator):
    planner = ContactPlanner(scene)
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    state = simulator.initial_state(root.pose.as_array(), root.joints.as_array())
    energy = mechanical_energy(scene, simulator, state)
    for _ in range(100):
        state, _ = simulator.step(state, hand_gravity(scene, state.q))
        current = mechanical_energy(scene, simulator, state)
        assert current <= energy + 1e-5
        energy = current


def test_static_grasp_holds_the_object(scene, simulator):
    plan = held_plan(scene)
    report = simulator.execute_plan(plan)
    assert not report.dropped
    assert report.times.size == 200
    drift = np.abs(report.poses - plan.x[0]).max(axis=0)
    assert drift[0] < 1e-3 and drift[1] < 1e-3
    assert report.mae_y < 1e-3
    assert report.contact_flags[-1].all()


def test_contact_forces_respect_friction_and_sign(scene, simulator):
    report = simulator.execute_plan(held_plan(scene))
    assert np.all(report.normal_forces >= 0.0)
    assert np.all(np.abs(report.tangential_forces) <= scene.friction_mu * report.normal_forces + 1e-12)
    assert np.all(report.contact_flags == (report.normal_forces > 0.0))


def test_unsupported_object_is_reported_dropped(scene, simulator):
    report = simulator.execute_plan(open_hand_plan(scene))
    assert report.dropped
    # |y| = g t²/2 dépasse 5 cm vers t ≈ 0.101 s
    assert report.drop_time == pytest.approx(math.sqrt(2 * 0.05 / scene.gravity), abs=2e-3)
    assert report.times.size < 300
    assert report.times[-1] == pytest.approx(report.drop_time)


def test_follow_reference_has_no_tracking_error(scene):
    simulator = Simulator(scene, SimOptions(follow_reference=True))
    report = simulator.execute_plan(open_hand_plan(scene))
    assert not report.dropped
    assert report.mae == pytest.approx(np.zeros(3))
    assert report.times.size == 300


def test_impedance_control_at_reference_is_gravity_compensation(scene):
    state = SimState([0.0, 0.0, 0.0], np.zeros(3), OPEN_HAND, np.zeros(8))
    tips = fingertip_positions(scene, OPEN_HAND)
    reference = ControlReference(tips, np.zeros((4, 2)), np.zeros((4, 2)))
    tau = impedance_control(scene, state, reference, ControllerGains(kp=200.0, kv=10.0))
    assert tau == pytest.approx(hand_gravity(scene, OPEN_HAND))


def test_control_reference_rotates_local_forces(scene, simulator):
    plan = held_plan(scene)
    lam = np.zeros(8)
    lam[0] = 1.0
    reference = control_reference(scene, simulator.geometry, plan.x[0], plan.q[0], plan.qd[0], lam)
    # contact 0 sur la face haute: normale entrante (0, -1)
    assert reference.tip_forces[0] == pytest.approx([0.0, -1.0], abs=1e-9)
    assert reference.tip_forces[1:] == pytest.approx(np.zeros((3, 2)))
    assert reference.tip_velocities == pytest.approx(np.zeros((4, 2)))


def test_step_rejects_large_time_steps(scene, simulator):
    state = simulator.initial_state(scene.start_pose.as_array(), OPEN_HAND)
    with pytest.raises(SimulationError):
        simulator.step(state, np.zeros(8), dt=2e-3)


def test_step_rejects_non_finite_state(scene, simulator):
    state = simulator.initial_state([5.0, 5.0, 0.0], OPEN_HAND)
    with pytest.raises(SimulationError):
        simulator.step(state, np.full(8, np.nan))


def test_contact_changes_are_counted_per_segment():
    flags = np.array([
        [True, True, True, True],
        [False, True, True, True],
        [True, True, True, True],
        [True, True, False, False],
    ])
    report = ExecutionReport(
        times=np.array([0.05, 0.1, 0.15, 0.2]),
        pose_error=np.zeros((4, 3)),
        mae=np.zeros(3),
        dropped=False,
        contact_flags=flags,
    )
    # segment 1: lignes 0-1, segment 2: lignes 2-3
    assert max_contact_changes_per_segment(report, 0.1) == 2
    assert max_contact_changes_per_segment(report, 1.0) == 3
