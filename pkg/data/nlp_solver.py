"""
Data Layer: NLP Solver
Lagrangien augmenté (schéma LANCELOT) avec sous-problèmes à bornes résolus par L-BFGS-B
"""
from __future__ import annotations

import time
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import optimize, sparse

from domain.entities import (
    DERIVATIVE_ERROR,
    BlockError,
    DerivativeReport,
    IterationRecord,
    NlpProblem,
    NlpSolution,
    SolverOptions,
    SolverStatus,
)


class NlpSolverError(Exception):
    """Exception pour les entrées invalides du solveur NLP"""
    pass


class AugmentedLagrangianSolver:
    """
    min f(z) s.c. h(z) = 0, g(z) ≥ 0, l ≤ z ≤ u

    Les inégalités deviennent g(z) − s = 0 avec des écarts s ≥ 0; le sous-problème
    min_{l≤z≤u, s≥0} f + yᵀc + ρ/2‖c‖² est résolu par L-BFGS-B. Après chaque
    sous-problème: mise à jour des multiplicateurs si la violation a suffisamment
    diminué, sinon augmentation de la pénalité.
    """

    # Heuristiques LANCELOT
    alpha = 0.1
    beta = 0.9
    update_tol0 = 0.1

    def solve(self, problem: NlpProblem, init: np.ndarray, options: Optional[SolverOptions] = None) -> NlpSolution:
        options = options or SolverOptions()
        started = time.perf_counter()
        n, m_e, m_i = problem.n, problem.m_eq, problem.m_ineq

        z0 = np.asarray(init, dtype=float).reshape(-1)
        if z0.size != n:
            raise NlpSolverError(f"initial point has {z0.size} entries, expected {n}")
        z = np.clip(z0, problem.lower, problem.upper)
        clamped = bool(np.any(z != z0))
        if clamped:
            logger.warning(f"initial point clamped into bounds on {int(np.sum(z != z0))} entries")

        location = self._non_finite(problem, z)
        if location:
            return self._diverged(problem, z, [], started, clamped, f"non-finite evaluation at start: {location}")

        s = np.maximum(problem.ineq(z), 0.0) if m_i else np.zeros(0)
        w = np.concatenate([z, s])
        bounds = list(zip(problem.lower, problem.upper)) + [(0.0, None)] * m_i
        bounds = [(None if not np.isfinite(lo) else lo, None if hi is None or not np.isfinite(hi) else hi)
                  for lo, hi in bounds]
        lo_w = np.concatenate([problem.lower, np.zeros(m_i)])
        hi_w = np.concatenate([problem.upper, np.full(m_i, np.inf)])

        y = np.zeros(m_e + m_i)
        rho = options.initial_penalty
        update_tol = self.update_tol0 / rho ** self.alpha
        inner_tol = max(options.optimality_tol, 1.0 / rho)
        previous_violation = np.inf
        log: List[IterationRecord] = []
        status = SolverStatus.ITERATION_LIMIT
        message = "outer iteration limit reached"
        stationarity = np.inf

        for outer in range(options.max_outer_iterations):
            lagrangian = self._lagrangian(problem, y, rho)
            result = optimize.minimize(
                lagrangian,
                w,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": options.max_inner_iterations, "gtol": inner_tol, "ftol": 1e-15},
            )
            w = np.clip(result.x, lo_w, hi_w)
            z = w[:n]
            location = self._non_finite(problem, z)
            if location or not np.isfinite(result.fun):
                return self._diverged(problem, z, log, started, clamped,
                                      f"non-finite evaluation at outer iteration {outer}: {location or 'objective'}")

            c = self._residual(problem, w)
            violation = problem.violation(z)
            y_next = y + rho * c
            _, grad = self._lagrangian(problem, y, rho)(w)
            stationarity = float(np.max(np.abs(np.clip(w - grad, lo_w, hi_w) - w))) if w.size else 0.0
            objective = float(problem.objective(z)[0])

            if violation <= options.constraint_tol and stationarity <= options.optimality_tol:
                y = y_next
                log.append(self._record(outer, objective, violation, stationarity, rho, result.nit, started))
                status = SolverStatus.CONVERGED
                message = "first-order conditions satisfied"
                break

            if violation <= max(update_tol, options.constraint_tol) and violation <= previous_violation:
                y = y_next
                update_tol = update_tol / rho ** self.beta
                inner_tol = max(options.optimality_tol, inner_tol / rho)
            else:
                rho *= options.penalty_growth
                update_tol = self.update_tol0 / rho ** self.alpha
                inner_tol = max(options.optimality_tol, 1.0 / rho)
            previous_violation = violation
            log.append(self._record(outer, objective, violation, stationarity, rho, result.nit, started))
            logger.debug(
                f"AL iter {outer}: f={objective:.6g} viol={violation:.3e} stat={stationarity:.3e} rho={rho:.1e}"
            )

            if rho > options.max_penalty:
                status = SolverStatus.DIVERGED
                message = f"penalty exceeded {options.max_penalty:g}"
                break
            if time.perf_counter() - started > options.time_limit:
                status = SolverStatus.TIME_LIMIT
                message = f"time limit of {options.time_limit:g}s reached"
                break

        z = w[:n]
        return NlpSolution(
            status=status,
            z=z,
            objective=float(problem.objective(z)[0]),
            violation=problem.violation(z),
            stationarity=stationarity,
            iterations=len(log),
            solve_time=time.perf_counter() - started,
            multipliers_eq=y[:m_e].copy(),
            multipliers_ineq=y[m_e:].copy(),
            block_violations=problem.block_violations(z),
            iteration_log=log,
            clamped_start=clamped,
            message=message,
        )

    @staticmethod
    def _residual(problem: NlpProblem, w: np.ndarray) -> np.ndarray:
        n = problem.n
        z, s = w[:n], w[n:]
        parts = []
        if problem.m_eq:
            parts.append(problem.eq(z))
        if problem.m_ineq:
            parts.append(problem.ineq(z) - s)
        return np.concatenate(parts) if parts else np.zeros(0)

    @staticmethod
    def _lagrangian(problem: NlpProblem, y: np.ndarray, rho: float):
        n, m_e, m_i = problem.n, problem.m_eq, problem.m_ineq

        def evaluate(w: np.ndarray) -> Tuple[float, np.ndarray]:
            z, s = w[:n], w[n:]
            f, grad_f = problem.objective(z)
            value = float(f)
            grad = np.zeros_like(w)
            grad[:n] = grad_f
            if m_e:
                c = problem.eq(z)
                weight = y[:m_e] + rho * c
                value += float(y[:m_e] @ c + 0.5 * rho * c @ c)
                grad[:n] += problem.eq_jacobian(z).T @ weight
            if m_i:
                c = problem.ineq(z) - s
                weight = y[m_e:] + rho * c
                value += float(y[m_e:] @ c + 0.5 * rho * c @ c)
                grad[:n] += problem.ineq_jacobian(z).T @ weight
                grad[n:] = -weight
            return value, grad

        return evaluate

    @staticmethod
    def _non_finite(problem: NlpProblem, z: np.ndarray) -> str:
        """Localise la première évaluation non finie ('' si tout est fini)."""
        f, grad = problem.objective(z)
        if not np.isfinite(f) or not np.all(np.isfinite(grad)):
            return "objective"
        for label, values, blocks in (
            ("eq", problem.eq(z) if problem.m_eq else np.zeros(0), problem.eq_blocks),
            ("ineq", problem.ineq(z) if problem.m_ineq else np.zeros(0), problem.ineq_blocks),
        ):
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                row = int(bad[0])
                for name, rows in blocks.items():
                    if rows.start <= row < rows.stop:
                        return f"{label} block {name!r} row {row - rows.start}"
                return f"{label} row {row}"
        return ""

    @staticmethod
    def _record(outer, objective, violation, stationarity, rho, inner, started) -> IterationRecord:
        return IterationRecord(
            iteration=outer,
            objective=objective,
            violation=violation,
            stationarity=stationarity,
            penalty=rho,
            inner_iterations=int(inner),
            elapsed=time.perf_counter() - started,
        )

    @staticmethod
    def _diverged(problem, z, log, started, clamped, message) -> NlpSolution:
        logger.error(message)
        return NlpSolution(
            status=SolverStatus.DIVERGED,
            z=z,
            objective=float("nan"),
            violation=float("nan"),
            stationarity=float("nan"),
            iterations=len(log),
            solve_time=time.perf_counter() - started,
            iteration_log=log,
            clamped_start=clamped,
            message=message,
        )


def _dense_rows(matrix) -> np.ndarray:
    return matrix.toarray() if sparse.issparse(matrix) else np.atleast_2d(np.asarray(matrix, dtype=float))


def check_derivatives(problem: NlpProblem, point: np.ndarray, step: float = 1e-6) -> DerivativeReport:
    """
    Compare gradient et jacobiennes analytiques à des différences finies centrées.

    Le pas vaut step·(1 + |z_j|); l'erreur est DERIVATIVE_ERROR, relative pour les
    coefficients de module ≥ 1 et absolue pour les coefficients (souvent nuls) plus petits.
    Renvoie un BlockError par bloc nommé, du pire au meilleur.
    """
    z = np.asarray(point, dtype=float).reshape(-1)
    n = problem.n
    grad = np.asarray(problem.objective(z)[1], dtype=float)
    J_eq = _dense_rows(problem.eq_jacobian(z)) if problem.m_eq else np.zeros((0, n))
    J_in = _dense_rows(problem.ineq_jacobian(z)) if problem.m_ineq else np.zeros((0, n))

    fd_grad = np.zeros(n)
    fd_eq = np.zeros_like(J_eq)
    fd_in = np.zeros_like(J_in)
    for j in range(n):
        h = step * (1.0 + abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        fd_grad[j] = (problem.objective(zp)[0] - problem.objective(zm)[0]) / (2.0 * h)
        if problem.m_eq:
            fd_eq[:, j] = (problem.eq(zp) - problem.eq(zm)) / (2.0 * h)
        if problem.m_ineq:
            fd_in[:, j] = (problem.ineq(zp) - problem.ineq(zm)) / (2.0 * h)

    def worst(analytic: np.ndarray, numeric: np.ndarray) -> Tuple[float, int, int]:
        if analytic.size == 0:
            return 0.0, -1, -1
        err = np.abs(analytic - numeric) / np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        return float(err[idx]), int(idx[0]), int(idx[1])

    blocks: List[BlockError] = []
    e, _, col = worst(grad[None, :], fd_grad[None, :])
    blocks.append(BlockError("objective", e, 0, col))
    for names, J, fd in ((problem.eq_blocks, J_eq, fd_eq), (problem.ineq_blocks, J_in, fd_in)):
        for name, rows in names.items():
            e, row, col = worst(J[rows], fd[rows])
            blocks.append(BlockError(name, e, row, col))
    blocks.sort(key=lambda b: b.error, reverse=True)
    return DerivativeReport(blocks)


def solve(problem: NlpProblem, init: np.ndarray, options: Optional[SolverOptions] = None) -> NlpSolution:
    return nlp_solver.solve(problem, init, options)


# Instance globale du solveur NLP
nlp_solver = AugmentedLagrangianSolver()
