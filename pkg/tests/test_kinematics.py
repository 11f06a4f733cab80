import cmath
import math

import numpy as np
import pytest

from domain.entities import Face, ObjectPose, default_scene
from domain.services.kinematics import (
    RectangleGeometry,
    fk_jacobian,
    forward_kinematics,
    grasp_matrix,
    hand_gravity,
    hand_jacobian,
    hand_potential_energy,
    inverse_kinematics,
    links_collide,
    solve_grasp_ik,
)


def test_forward_kinematics_matches_complex_rotations():
    rng = np.random.default_rng(0)
    base, links = (0.18, 0.13), (0.15, 0.10)
    for _ in range(100):
        q1, q2 = rng.uniform(-math.pi, math.pi, size=2)
        tip = complex(*base) + links[0] * cmath.exp(1j * q1) + links[1] * cmath.exp(1j * (q1 + q2))
        assert forward_kinematics(base, links, (q1, q2)) == pytest.approx([tip.real, tip.imag], abs=1e-12)


def test_inverse_kinematics_round_trip():
    rng = np.random.default_rng(1)
    base, links = (0.0, 0.0), (0.15, 0.10)
    worst = 0.0
    for _ in range(1000):
        q = rng.uniform(-math.pi, math.pi, size=2)
        tip = forward_kinematics(base, links, q)
        branch = 1 if math.sin(q[1]) >= 0 else -1
        solved = inverse_kinematics(base, links, tip, branch)
        assert solved is not None
        worst = max(worst, float(np.linalg.norm(forward_kinematics(base, links, solved) - tip)))
    assert worst < 1e-9


def test_inverse_kinematics_unreachable_and_limits():
    links = (0.15, 0.10)
    assert inverse_kinematics((0.0, 0.0), links, (0.3, 0.0), 1) is None
    assert inverse_kinematics((0.0, 0.0), links, (0.01, 0.0), 1) is None
    # cible atteignable mais angle distal hors limites
    assert inverse_kinematics((0.0, 0.0), links, (0.2, 0.0), 1, limits=((-1.0, 1.0), (-0.1, 0.1))) is None


def test_fk_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    base, links = (0.0, 0.0), (0.15, 0.10)
    h = 1e-6
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, size=2)
        J = fk_jacobian(links, q)
        for j in range(2):
            dq = np.zeros(2)
            dq[j] = h
            fd = (forward_kinematics(base, links, q + dq) - forward_kinematics(base, links, q - dq)) / (2 * h)
            assert J[:, j] == pytest.approx(fd, abs=1e-6)


def test_surface_point_parametrisation():
    geometry = RectangleGeometry(default_scene())
    start = geometry.surface_point(0.0)
    assert start.face == Face.RIGHT
    assert start.local_pos == pytest.approx((0.10, -0.05))
    top = geometry.surface_point(0.15)
    assert top.face == Face.TOP
    assert top.local_pos == pytest.approx((0.05, 0.05))
    assert top.normal == pytest.approx((0.0, -1.0))
    assert top.tangent == pytest.approx((-1.0, 0.0))
    bottom = geometry.surface_point(0.55)
    assert bottom.face == Face.BOTTOM
    assert bottom.local_pos == pytest.approx((0.05, -0.05))
    assert geometry.surface_point(0.6 + 0.15).local_pos == pytest.approx(top.local_pos)
    assert geometry.surface_point(-0.45).local_pos == pytest.approx(top.local_pos)


def test_displace_contact_across_corner_and_margin():
    geometry = RectangleGeometry(default_scene())
    contact = geometry.surface_point(0.08)
    moved = geometry.displace_contact(contact, 0.04)
    # 0.12: 2 cm après le coin haut-droit, le long de la face haute
    assert moved.face == Face.TOP
    assert moved.local_pos == pytest.approx((0.08, 0.05))
    assert geometry.displace_contact(contact, 0.02) is None


def test_grasp_matrix_single_contact_wrench():
    geometry = RectangleGeometry(default_scene())
    pose = ObjectPose(0.1, -0.2, 0.3)
    contact = geometry.surface_point(0.15)
    G = grasp_matrix(pose, [contact])
    R = pose.rotation()
    n = R @ contact.normal_vector()
    arm = R @ contact.position()
    assert G[:, 0] == pytest.approx([n[0], n[1], arm[0] * n[1] - arm[1] * n[0]])


def test_grasp_matrix_transpose_maps_twist_to_contact_velocity():
    geometry = RectangleGeometry(default_scene())
    pose = ObjectPose(0.02, 0.01, 0.4)
    contacts = [geometry.surface_point(s) for s in (0.15, 0.25, 0.45, 0.55)]
    twist = np.array([0.3, -0.2, 0.7])
    h = 1e-6
    G = grasp_matrix(pose, contacts)
    after = ObjectPose.from_array(pose.as_array() + h * twist)
    before = ObjectPose.from_array(pose.as_array() - h * twist)
    R = pose.rotation()
    for f, contact in enumerate(contacts):
        velocity = (after.to_world(contact.position()) - before.to_world(contact.position())) / (2 * h)
        expected = [R @ contact.normal_vector() @ velocity, R @ contact.tangent_vector() @ velocity]
        assert (G.T @ twist)[2 * f:2 * f + 2] == pytest.approx(expected, abs=1e-6)


def test_hand_jacobian_projects_tip_velocity():
    scene = default_scene()
    geometry = RectangleGeometry(scene)
    pose = scene.start_pose
    contacts = [geometry.surface_point(s) for s in scene.start_contacts]
    joints = solve_grasp_ik(scene, geometry, pose, contacts)
    q = joints.as_array()
    qd = np.random.default_rng(3).normal(size=8)
    lam = np.random.default_rng(4).normal(size=8)
    J = hand_jacobian(scene, pose, q, contacts)
    # appariement travail virtuel: λ·(J q̇) = (Jᵀλ)·q̇
    assert float(lam @ (J @ qd)) == pytest.approx(float((J.T @ lam) @ qd))
    for f, contact in enumerate(contacts):
        tip_velocity = fk_jacobian(scene.link_lengths[f], q[2 * f:2 * f + 2]) @ qd[2 * f:2 * f + 2]
        assert J[2 * f, :] @ qd == pytest.approx(contact.normal_vector() @ tip_velocity)


def test_hand_gravity_is_potential_gradient():
    scene = default_scene()
    q = np.random.default_rng(5).uniform(-math.pi, math.pi, size=8)
    h = 1e-6
    g = hand_gravity(scene, q)
    for j in range(8):
        dq = np.zeros(8)
        dq[j] = h
        fd = (hand_potential_energy(scene, q + dq) - hand_potential_energy(scene, q - dq)) / (2 * h)
        assert g[j] == pytest.approx(fd, abs=1e-7)


def test_start_grasp_is_reachable_without_link_collision():
    scene = default_scene()
    geometry = RectangleGeometry(scene)
    contacts = [geometry.surface_point(s) for s in scene.start_contacts]
    joints = solve_grasp_ik(scene, geometry, scene.start_pose, contacts)
    assert joints is not None
    for f, contact in enumerate(contacts):
        tip = forward_kinematics(scene.finger_bases[f], scene.link_lengths[f], joints.finger(f))
        assert geometry.signed_distance(scene.start_pose, tip) == pytest.approx(0.0, abs=1e-9)
    assert not links_collide(scene, geometry, scene.start_pose, joints.as_array())


def test_segment_intersects_rectangle():
    geometry = RectangleGeometry(default_scene())
    pose = ObjectPose(0.0, 0.0, 0.0)
    assert geometry.segment_intersects(pose, (-1.0, 0.0), (1.0, 0.0))
    assert not geometry.segment_intersects(pose, (-1.0, 0.2), (1.0, 0.2))
    assert not geometry.segment_intersects(pose, (0.2, -1.0), (0.2, 1.0))


def segment_distance(point, a, b):
    ab = b - a
    t = np.clip(np.dot(point - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(point - (a + t * ab)))


def brute_signed_distance(hx, hy, radius, local):
    """Distance aux quatre arêtes, signe donné par l'appartenance au rectangle."""
    corners = [np.array(c) for c in ((hx, -hy), (hx, hy), (-hx, hy), (-hx, -hy))]
    edges = zip(corners, corners[1:] + corners[:1])
    dist = min(segment_distance(local, a, b) for a, b in edges)
    inside = abs(local[0]) < hx and abs(local[1]) < hy
    return (-dist if inside else dist) - radius


def test_signed_distance_matches_brute_force():
    scene = default_scene()
    geometry = RectangleGeometry(scene)
    hx, hy = scene.half_extents
    rng = np.random.default_rng(4)
    pose = ObjectPose(0.04, -0.03, 0.7)
    for _ in range(10_000):
        local = rng.uniform([-2.0 * hx, -2.0 * hy], [2.0 * hx, 2.0 * hy])
        tip = pose.to_world(local)
        expected = brute_signed_distance(hx, hy, scene.fingertip_radius, local)
        assert geometry.signed_distance(pose, tip) == pytest.approx(expected, abs=1e-12)


def test_signed_distance_is_continuous_across_faces_and_corners():
    scene = default_scene()
    geometry = RectangleGeometry(scene)
    hx, hy = scene.half_extents
    pose = ObjectPose(0.0, 0.0, 0.0)
    step = 1e-4
    paths = [
        # traversée de chaque face par son milieu
        [np.array([x, 0.0]) for x in np.arange(0.0, 2.0 * hx, step)],
        [np.array([0.0, y]) for y in np.arange(0.0, 2.0 * hy, step)],
        # cercles autour de chaque coin
        *[
            [np.array([cx, cy]) + 0.01 * np.array([math.cos(a), math.sin(a)])
             for a in np.arange(0.0, 2.0 * math.pi, step / 0.01)]
            for cx, cy in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))
        ],
        # diagonale qui passe exactement par un coin
        [np.array([t * hx, t * hy]) for t in np.arange(0.5, 1.5, step)],
    ]
    for path in paths:
        values = [geometry.signed_distance(pose, p) for p in path]
        for (p, v), (q, w) in zip(zip(path, values), zip(path[1:], values[1:])):
            assert abs(v - w) <= np.linalg.norm(p - q) + 1e-12


def test_surface_point_normals_are_unit_and_inward():
    scene = default_scene()
    geometry = RectangleGeometry(scene)
    hx, hy = scene.half_extents
    eps = 1e-6
    for s in np.linspace(0.0, geometry.perimeter, 2001):
        contact = geometry.surface_point(s)
        p = np.asarray(contact.local_pos)
        n = contact.normal_vector()
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-15)
        assert np.dot(n, contact.tangent_vector()) == pytest.approx(0.0, abs=1e-15)
        # la normale pointe vers l'intérieur
        assert np.dot(n, -p) > 0.0
        inner, outer = p + eps * n, p - eps * n
        assert abs(inner[0]) <= hx + 1e-15 and abs(inner[1]) <= hy + 1e-15
        assert abs(outer[0]) > hx or abs(outer[1]) > hy
