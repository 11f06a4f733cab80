import numpy as np
import pytest
from scipy import optimize, sparse

from data.nlp_solver import AugmentedLagrangianSolver, NlpSolverError, check_derivatives, solve
from domain.entities import DERIVATIVE_ERROR, NlpProblem, SolverOptions, SolverStatus


def small_qp(*, corrupt_jacobian=False, objective_value=None, eq_value=None):
    """min (x0-1)² + (x1-2)²  s.c.  x0 + x1 = 1,  x0 ≥ 0.25,  -5 ≤ x ≤ 5"""

    def objective(z):
        f = (z[0] - 1.0) ** 2 + (z[1] - 2.0) ** 2
        if objective_value is not None:
            f = objective_value
        return f, np.array([2.0 * (z[0] - 1.0), 2.0 * (z[1] - 2.0)])

    def eq(z):
        if eq_value is not None:
            return np.array([eq_value])
        return np.array([z[0] + z[1] - 1.0])

    def eq_jacobian(z):
        scale = 2.0 if corrupt_jacobian else 1.0
        return sparse.csr_matrix([[scale, 1.0]])

    return NlpProblem(
        n=2,
        lower=np.full(2, -5.0),
        upper=np.full(2, 5.0),
        objective=objective,
        eq=eq,
        eq_jacobian=eq_jacobian,
        ineq=lambda z: np.array([z[0] - 0.25]),
        ineq_jacobian=lambda z: sparse.csr_matrix([[1.0, 0.0]]),
        m_eq=1,
        m_ineq=1,
        eq_blocks={"balance": slice(0, 1)},
        ineq_blocks={"floor": slice(0, 1)},
    )


def test_small_qp_reaches_the_kkt_point():
    solution = solve(small_qp(), np.zeros(2))
    assert solution.converged
    assert solution.z == pytest.approx([0.25, 0.75], abs=1e-3)
    assert solution.violation <= 1e-6
    # multiplicateur de l'inégalité active: ∇f = -y_eq ∇h - y_in ∇g
    assert solution.multipliers_eq == pytest.approx([2.5], abs=1e-2)
    assert solution.multipliers_ineq == pytest.approx([-1.0], abs=1e-2)
    assert solution.iterations == len(solution.iteration_log)
    assert set(solution.block_violations) == {"balance", "floor"}


def test_iteration_log_is_serialisable():
    solution = solve(small_qp(), np.zeros(2))
    record = solution.iteration_log[-1].to_dict()
    assert set(record) == {"iteration", "objective", "violation", "stationarity", "penalty",
                           "inner_iterations", "elapsed"}


def test_initial_point_outside_bounds_is_clamped():
    solution = solve(small_qp(), np.array([9.0, 0.0]))
    assert solution.clamped_start
    assert solution.converged


def test_initial_point_size_is_checked():
    with pytest.raises(NlpSolverError):
        AugmentedLagrangianSolver().solve(small_qp(), np.zeros(3))


def test_non_finite_objective_diverges():
    solution = solve(small_qp(objective_value=float("nan")), np.zeros(2))
    assert solution.status == SolverStatus.DIVERGED
    assert "objective" in solution.message


def test_non_finite_constraint_names_its_block():
    solution = solve(small_qp(eq_value=float("inf")), np.zeros(2))
    assert solution.status == SolverStatus.DIVERGED
    assert "balance" in solution.message


def test_infeasible_problem_does_not_converge():
    problem = NlpProblem(
        n=1,
        lower=np.array([-1.0]),
        upper=np.array([1.0]),
        objective=lambda z: (float(z[0] ** 2), 2.0 * z),
        eq=lambda z: np.zeros(0),
        eq_jacobian=lambda z: sparse.csr_matrix((0, 1)),
        ineq=lambda z: np.array([z[0] - 2.0]),
        ineq_jacobian=lambda z: sparse.csr_matrix([[1.0]]),
        m_eq=0,
        m_ineq=1,
    )
    solution = solve(problem, np.zeros(1), SolverOptions(max_outer_iterations=6))
    assert not solution.converged
    assert solution.violation == pytest.approx(1.0, abs=1e-3)


def test_check_derivatives_passes_on_exact_derivatives():
    report = check_derivatives(small_qp(), np.array([0.3, -0.7]))
    assert report.passed(1e-6)
    assert {b.block for b in report.blocks} == {"objective", "balance", "floor"}


def test_check_derivatives_flags_corrupted_jacobian():
    report = check_derivatives(small_qp(corrupt_jacobian=True), np.array([0.3, -0.7]))
    assert not report.passed(1e-6)
    assert report.worst.block == "balance"
    assert (report.worst.row, report.worst.col) == (0, 0)
    assert report.worst.error == pytest.approx(0.5)


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(constraint_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(penalty_growth=1.0)


def linear_constraints_problem(eq_coef, eq_reported, ineq_coef, ineq_reported):
    """h(z) = eq_coef·z0, g(z) = ineq_coef·z1, jacobiennes déclarées éventuellement fausses."""
    return NlpProblem(
        n=2,
        lower=np.full(2, -1.0),
        upper=np.full(2, 1.0),
        objective=lambda z: (float(z @ z), 2.0 * z),
        eq=lambda z: np.array([eq_coef * z[0]]),
        eq_jacobian=lambda z: sparse.csr_matrix([[eq_reported, 0.0]]),
        ineq=lambda z: np.array([ineq_coef * z[1]]),
        ineq_jacobian=lambda z: sparse.csr_matrix([[0.0, ineq_reported]]),
        m_eq=1,
        m_ineq=1,
        eq_blocks={"large": slice(0, 1)},
        ineq_blocks={"small": slice(0, 1)},
    )


def test_derivative_error_is_relative_for_large_coefficients():
    report = check_derivatives(linear_constraints_problem(1000.0, 1001.0, 0.0, 0.0), np.array([0.1, 0.2]))
    large = next(b for b in report.blocks if b.block == "large")
    assert large.error == pytest.approx(1.0 / 1001.0, rel=1e-3)
    assert report.worst.block == "large"


def test_derivative_error_is_absolute_for_small_coefficients():
    report = check_derivatives(linear_constraints_problem(1.0, 1.0, 0.0, 1e-3), np.array([0.1, 0.2]))
    small = next(b for b in report.blocks if b.block == "small")
    assert small.error == pytest.approx(1e-3, rel=1e-3)
    large = next(b for b in report.blocks if b.block == "large")
    assert large.error < 1e-8


def test_derivative_error_measure_is_documented():
    assert DERIVATIVE_ERROR == "|a − d| / max(1, |a|, |d|)"


def unconstrained_bounds(n):
    return np.full(n, -np.inf), np.full(n, np.inf)


def test_active_inequality_pins_the_minimiser():
    """min (z-3)²  s.c.  z ≥ 5"""
    lower, upper = unconstrained_bounds(1)
    problem = NlpProblem(
        n=1,
        lower=lower,
        upper=upper,
        objective=lambda z: (float((z[0] - 3.0) ** 2), np.array([2.0 * (z[0] - 3.0)])),
        eq=lambda z: np.zeros(0),
        eq_jacobian=lambda z: sparse.csr_matrix((0, 1)),
        ineq=lambda z: np.array([z[0] - 5.0]),
        ineq_jacobian=lambda z: sparse.csr_matrix([[1.0]]),
        m_eq=0,
        m_ineq=1,
    )
    solution = solve(problem, np.zeros(1))
    assert solution.converged
    assert solution.z == pytest.approx([5.0], abs=1e-4)
    assert solution.objective == pytest.approx(4.0, abs=1e-3)


def test_equality_splits_the_mass_evenly():
    """min z1² + z2²  s.c.  z1 + z2 = 1"""
    lower, upper = unconstrained_bounds(2)
    problem = NlpProblem(
        n=2,
        lower=lower,
        upper=upper,
        objective=lambda z: (float(z @ z), 2.0 * z),
        eq=lambda z: np.array([z[0] + z[1] - 1.0]),
        eq_jacobian=lambda z: sparse.csr_matrix([[1.0, 1.0]]),
        ineq=lambda z: np.zeros(0),
        ineq_jacobian=lambda z: sparse.csr_matrix((0, 2)),
        m_eq=1,
        m_ineq=0,
    )
    solution = solve(problem, np.array([3.0, -4.0]))
    assert solution.converged
    assert solution.z == pytest.approx([0.5, 0.5], abs=1e-4)
    assert solution.multipliers_eq == pytest.approx([-1.0], abs=1e-2)


def random_convex_qp(rng, n=3):
    """½zᵀPz + qᵀz, une égalité, deux inégalités, toujours réalisable."""
    M = rng.normal(size=(n, n))
    P = M.T @ M + 0.5 * np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(1, n))
    G = rng.normal(size=(2, n))
    feasible = rng.uniform(-1.0, 1.0, size=n)
    b = A @ feasible
    h = G @ feasible - rng.uniform(0.0, 1.0, size=2)
    problem = NlpProblem(
        n=n,
        lower=np.full(n, -10.0),
        upper=np.full(n, 10.0),
        objective=lambda z: (float(0.5 * z @ P @ z + q @ z), P @ z + q),
        eq=lambda z: A @ z - b,
        eq_jacobian=lambda z: sparse.csr_matrix(A),
        ineq=lambda z: G @ z - h,
        ineq_jacobian=lambda z: sparse.csr_matrix(G),
        m_eq=1,
        m_ineq=2,
    )
    return problem, P, q, A, b, G, h


def test_random_convex_qps_match_scipy_slsqp():
    rng = np.random.default_rng(7)
    for _ in range(100):
        problem, P, q, A, b, G, h = random_convex_qp(rng)
        ours = solve(problem, np.zeros(problem.n), SolverOptions(constraint_tol=1e-9, optimality_tol=1e-7))
        reference = optimize.minimize(
            lambda z: 0.5 * z @ P @ z + q @ z,
            np.zeros(problem.n),
            jac=lambda z: P @ z + q,
            method="SLSQP",
            bounds=[(-10.0, 10.0)] * problem.n,
            constraints=[
                {"type": "eq", "fun": lambda z: A @ z - b, "jac": lambda z: A},
                {"type": "ineq", "fun": lambda z: G @ z - h, "jac": lambda z: G},
            ],
            options={"ftol": 1e-12, "maxiter": 500},
        )
        assert reference.success
        assert ours.converged
        assert ours.violation <= 1e-9
        assert ours.objective == pytest.approx(reference.fun, rel=1e-6, abs=1e-6)
        assert ours.z == pytest.approx(reference.x, abs=1e-4)


def test_identical_inputs_give_identical_iteration_logs():
    def trace(solution):
        return [{k: v for k, v in r.to_dict().items() if k != "elapsed"} for r in solution.iteration_log]

    first = solve(small_qp(), np.array([0.4, -0.3]))
    second = solve(small_qp(), np.array([0.4, -0.3]))
    assert trace(first) == trace(second)
    assert np.array_equal(first.z, second.z)


def test_penalty_never_decreases():
    rng = np.random.default_rng(11)
    problems = [small_qp()] + [random_convex_qp(rng)[0] for _ in range(10)]
    for problem in problems:
        solution = solve(problem, np.full(problem.n, 4.0))
        penalties = [r.penalty for r in solution.iteration_log]
        assert penalties
        assert all(later >= earlier for earlier, later in zip(penalties, penalties[1:]))
