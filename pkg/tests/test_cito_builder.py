import numpy as np
import pytest

from data.nlp_solver import check_derivatives
from domain.entities import ContactSequence, CostWeights, ObjectPose, default_scene
from domain.services.cito_builder import (
    PLAN_WARM_START,
    STATIC_EQUILIBRIUM,
    CitoBuildError,
    build_general_cito,
    build_transition_cito,
    incremental_pose_targets,
    initial_guess,
    pack_plan,
    plan_from_solution,
    solution_residuals,
)
from domain.services.contact_planner import ContactPlanner

DT = 0.1


@pytest.fixture
def scene():
    return default_scene()


@pytest.fixture
def planner(scene):
    return ContactPlanner(scene)


def chain(planner, contact_sets, pose=None):
    """Séquence de noeuds à pose constante, un jeu de contacts par noeud."""
    scene = planner.scene
    pose = pose or scene.start_pose
    nodes, parent = [], None
    for depth, arc_lengths in enumerate(contact_sets):
        contacts = [planner.geometry.surface_point(s) for s in arc_lengths]
        node = planner.make_node(depth, pose, contacts, parent)
        nodes.append(node)
        parent = node
    return ContactSequence(nodes)


def perturbed(problem, z, seed=1):
    noise = 1e-3 * np.random.default_rng(seed).standard_normal(problem.n)
    return np.clip(z + noise, problem.lower, problem.upper)


def test_incremental_pose_targets_cover_each_segment():
    poses = [ObjectPose(0.0, 0.0, 0.0), ObjectPose(0.0, 0.0, 0.1), ObjectPose(0.0, 0.0, 0.2)]
    pairs = incremental_pose_targets(poses, 2)
    assert [k for k, _ in pairs] == [0, 1, 2, 2, 3, 4]
    assert pairs[0][1] == pytest.approx([0.0, 0.0, 0.1])
    assert pairs[-1][1] == pytest.approx([0.0, 0.0, 0.2])


def test_zero_change_transition_has_no_complementarity_rows(scene, planner):
    sequence = chain(planner, [scene.start_contacts] * 3)
    problem = build_transition_cito(scene, sequence, 2, DT, CostWeights())
    assert "normal_complementarity" not in problem.ineq_blocks
    assert "sliding_complementarity" not in problem.ineq_blocks
    assert not problem.metadata["complementarity"].any()
    knots = 2 * 2 + 1
    assert problem.metadata["knots"] == knots
    assert len(problem.metadata["pins"]) == 2 * 2 * 4 + 4
    assert problem.n == knots * (3 + 3 + 8 + 8 + 8 + 8 + 4) + len(problem.metadata["pins"])
    assert [s.free_finger for s in problem.metadata["schedule"]] == [None, None]


def test_static_guess_satisfies_the_transition_problem(scene, planner):
    sequence = chain(planner, [scene.start_contacts] * 3)
    problem = build_transition_cito(scene, sequence, 2, DT, CostWeights())
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 4, DT, sequence=sequence)
    z = pack_plan(problem, guess)
    assert problem.violation(z) < 1e-9
    residuals = solution_residuals(problem, z)
    assert residuals["object_dynamics"] < 1e-9
    assert residuals["hand_dynamics"] < 1e-9
    assert residuals["boundary"] == 0.0


def test_free_finger_gets_complementarity_between_its_pins(scene, planner):
    moved = (0.17,) + tuple(scene.start_contacts[1:])
    sequence = chain(planner, [scene.start_contacts, moved, moved])
    steps = 4
    problem = build_transition_cito(scene, sequence, steps, DT, CostWeights())
    mask = problem.metadata["complementarity"]
    assert mask[1:3, 0].all()
    assert mask.sum() == 2
    rows = problem.ineq_blocks
    assert rows["normal_complementarity"].stop - rows["normal_complementarity"].start == 2
    assert rows["sliding_complementarity"].stop - rows["sliding_complementarity"].start == 8
    pins = problem.metadata["pins"]
    assert (0, 0) in pins and (steps - 1, 0) in pins
    assert (1, 0) not in pins and (2, 0) not in pins
    assert len(pins) == 2 + 3 * steps + 4 * steps + 4
    schedule = problem.metadata["schedule"]
    assert schedule[0].free_finger == 0
    assert schedule[0].end_contacts[0] == pytest.approx(0.17)


def test_transition_derivatives_match_finite_differences(scene, planner):
    sequence = chain(planner, [scene.start_contacts] * 3)
    problem = build_transition_cito(scene, sequence, 2, DT, CostWeights())
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 4, DT, sequence=sequence)
    report = check_derivatives(problem, perturbed(problem, pack_plan(problem, guess)))
    assert report.passed(1e-6), report.worst


def test_general_derivatives_match_finite_differences(scene, planner):
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 2, DT, start=root)
    goal = ObjectPose(0.0, 0.0, 0.3)
    problem = build_general_cito(scene, root.pose, root.joints, goal, 2, DT, CostWeights(), guess)
    assert problem.metadata["complementarity"].all()
    assert problem.initial is not None
    report = check_derivatives(problem, perturbed(problem, problem.initial))
    assert report.passed(1e-6), report.worst


def test_general_start_state_is_fixed(scene, planner):
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 3, DT, start=root)
    problem = build_general_cito(scene, root.pose, root.joints, ObjectPose(0.0, 0.0, 0.2), 3, DT,
                                 CostWeights(), guess)
    layout = problem.layout
    for name, value in (("x", root.pose.as_array()), ("q", root.joints.as_array()), ("xd", np.zeros(3))):
        rows = slice(layout.slice(name).start, layout.slice(name).start + value.size)
        assert problem.lower[rows] == pytest.approx(value)
        assert problem.upper[rows] == pytest.approx(value)


def test_single_knot_uses_static_equilibrium_rows(scene, planner):
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 0, DT, start=root)
    problem = build_general_cito(scene, root.pose, root.joints, root.pose, 0, DT, CostWeights(), guess)
    assert set(problem.eq_blocks) == {"object_dynamics", "hand_dynamics"}
    assert problem.violation(problem.initial) < 1e-9


def test_plan_warm_start_interpolates_between_nodes(scene, planner):
    moved = (0.17,) + tuple(scene.start_contacts[1:])
    sequence = chain(planner, [scene.start_contacts, moved, moved])
    guess = initial_guess(PLAN_WARM_START, scene, 4, DT, sequence=sequence)
    assert guess.knots == 5
    assert guess.q[0] == pytest.approx(sequence.nodes[0].joints.as_array())
    assert guess.q[2] == pytest.approx(sequence.nodes[1].joints.as_array())
    assert guess.q[4] == pytest.approx(sequence.nodes[2].joints.as_array())
    midpoint = 0.5 * (sequence.nodes[0].joints.as_array() + sequence.nodes[1].joints.as_array())
    assert guess.q[1] == pytest.approx(midpoint)
    assert np.all(guess.xd == 0.0) and np.all(guess.qd == 0.0)


def test_solution_round_trip_through_decision_vector(scene, planner):
    sequence = chain(planner, [scene.start_contacts] * 3)
    problem = build_transition_cito(scene, sequence, 2, DT, CostWeights())
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 4, DT, sequence=sequence)
    plan = plan_from_solution(problem, pack_plan(problem, guess))
    assert plan.kind == "transition"
    assert plan.x == pytest.approx(guess.x)
    assert plan.lam == pytest.approx(guess.lam)
    assert plan.pin_slack.size == len(problem.metadata["pins"])
    assert len(plan.schedule) == 2


def test_build_errors(scene, planner):
    root = planner.initial_node(scene.start_pose, scene.start_contacts)
    guess = initial_guess(STATIC_EQUILIBRIUM, scene, 2, DT, start=root)
    goal = ObjectPose(0.0, 0.0, 0.3)
    with pytest.raises(CitoBuildError):
        build_general_cito(scene, root.pose, root.joints, goal, 3, DT, CostWeights(), guess)
    with pytest.raises(CitoBuildError):
        build_general_cito(scene, root.pose, root.joints, goal, -1, DT, CostWeights(), guess)
    with pytest.raises(CitoBuildError):
        build_general_cito(scene, root.pose, root.joints, goal, 2, DT, CostWeights(), guess,
                           pose_targets=[(5, goal.as_array())])
    with pytest.raises(CitoBuildError):
        initial_guess("random", scene, 2, DT, start=root)
    with pytest.raises(CitoBuildError):
        initial_guess(PLAN_WARM_START, scene, 2, DT)
    sequence = chain(planner, [scene.start_contacts] * 3)
    with pytest.raises(CitoBuildError):
        initial_guess(PLAN_WARM_START, scene, 5, DT, sequence=sequence)
