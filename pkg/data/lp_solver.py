"""
Data Layer: LP Solver
Simplexe dense en deux phases (règle de Bland) pour les petits programmes linéaires
"""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from domain.entities import LinearProgram, LpResult, LpStatus


class LpSolverError(Exception):
    """Exception pour les erreurs internes du simplexe"""
    pass


class DenseSimplexSolver:
    """
    Simplexe à tableau dense.

    Le programme est ramené à la forme standard min cᵀy, Ay = b, y ≥ 0 par
    translation/symétrie des variables bornées et dédoublement des variables libres.
    """

    def __init__(self, tol: float = 1e-9, max_iterations: Optional[int] = None):
        self.tol = tol
        self.max_iterations = max_iterations

    def solve(self, lp: LinearProgram) -> LpResult:
        offset, T, extra_rows = self._substitution(lp)
        c_y = T.T @ lp.c
        const = float(lp.c @ offset)

        ub_rows = [lp.A_ub @ T] if lp.A_ub.size else []
        ub_rhs = [lp.b_ub - lp.A_ub @ offset] if lp.A_ub.size else []
        for col, bound in extra_rows:
            row = np.zeros(T.shape[1])
            row[col] = 1.0
            ub_rows.append(row[None, :])
            ub_rhs.append(np.array([bound]))
        A_ub = np.vstack(ub_rows) if ub_rows else np.zeros((0, T.shape[1]))
        b_ub = np.concatenate(ub_rhs) if ub_rhs else np.zeros(0)
        A_eq = lp.A_eq @ T if lp.A_eq.size else np.zeros((0, T.shape[1]))
        b_eq = lp.b_eq - lp.A_eq @ offset if lp.A_eq.size else np.zeros(0)

        n_y = T.shape[1]
        m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
        A = np.zeros((m_ub + m_eq, n_y + m_ub))
        A[:m_ub, :n_y] = A_ub
        A[:m_ub, n_y:] = np.eye(m_ub)
        A[m_ub:, :n_y] = A_eq
        b = np.concatenate([b_ub, b_eq])
        cost = np.concatenate([c_y, np.zeros(m_ub)])

        status, y, iterations = self._two_phase(A, b, cost)
        if status != LpStatus.OPTIMAL:
            logger.debug(f"LP {status.value} after {iterations} pivots")
            return LpResult(status=status, iterations=iterations)
        x = offset + T @ y[:n_y]
        return LpResult(status=LpStatus.OPTIMAL, x=x, value=float(lp.c @ x), iterations=iterations)

    def _substitution(self, lp: LinearProgram) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, float]]]:
        """x = offset + T·y avec y ≥ 0; renvoie aussi les bornes supérieures résiduelles."""
        columns: List[np.ndarray] = []
        offset = np.zeros(lp.n)
        extra: List[Tuple[int, float]] = []
        for j in range(lp.n):
            lo, hi = lp.lower[j], lp.upper[j]
            unit = np.zeros(lp.n)
            unit[j] = 1.0
            if np.isfinite(lo):
                offset[j] = lo
                columns.append(unit)
                if np.isfinite(hi):
                    extra.append((len(columns) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                columns.append(-unit)
            else:
                columns.append(unit)
                columns.append(-unit)
        T = np.column_stack(columns) if columns else np.zeros((lp.n, 0))
        return offset, T, extra

    def _two_phase(self, A: np.ndarray, b: np.ndarray, cost: np.ndarray):
        m, n = A.shape
        A = A.copy()
        b = b.copy()
        negative = b < 0
        A[negative] *= -1.0
        b[negative] *= -1.0

        tableau = np.hstack([A, np.eye(m), b[:, None]])
        basis = list(range(n, n + m))
        phase_one = np.concatenate([np.zeros(n), np.ones(m)])
        limit = self.max_iterations or 50 * (m + n + 10)

        status, iterations = self._iterate(tableau, basis, phase_one, limit)
        if status == LpStatus.UNBOUNDED:
            raise LpSolverError("phase one cannot be unbounded")
        infeasibility = float(phase_one[basis] @ tableau[:, -1])
        if infeasibility > self.tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpStatus.INFEASIBLE, None, iterations

        # Sortie des variables artificielles encore en base
        keep = []
        for i in range(m):
            if basis[i] < n:
                keep.append(i)
                continue
            candidates = np.flatnonzero(np.abs(tableau[i, :n]) > self.tol)
            if candidates.size:
                self._pivot(tableau, basis, i, int(candidates[0]))
                keep.append(i)
        tableau = np.hstack([tableau[keep, :n], tableau[keep, -1:]])
        basis = [basis[i] for i in keep]

        status, more = self._iterate(tableau, basis, cost, limit)
        iterations += more
        if status == LpStatus.UNBOUNDED:
            return status, None, iterations
        y = np.zeros(n)
        y[basis] = tableau[:, -1]
        return LpStatus.OPTIMAL, y, iterations

    def _iterate(self, tableau: np.ndarray, basis: List[int], cost: np.ndarray, limit: int):
        iterations = 0
        while iterations < limit:
            reduced = cost - cost[basis] @ tableau[:, :-1]
            entering = np.flatnonzero(reduced < -self.tol)
            if entering.size == 0:
                return LpStatus.OPTIMAL, iterations
            col = int(entering[0])
            column = tableau[:, col]
            rows = np.flatnonzero(column > self.tol)
            if rows.size == 0:
                return LpStatus.UNBOUNDED, iterations
            ratios = tableau[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol]
            row = int(min(ties, key=lambda r: basis[r]))
            self._pivot(tableau, basis, row, col)
            iterations += 1
        raise LpSolverError(f"simplex did not terminate within {limit} pivots")

    @staticmethod
    def _pivot(tableau: np.ndarray, basis: List[int], row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        for i in range(tableau.shape[0]):
            if i != row and tableau[i, col] != 0.0:
                tableau[i] -= tableau[i, col] * tableau[row]
        basis[row] = col


def lp_solve(lp: LinearProgram) -> LpResult:
    """Résout un programme linéaire avec le simplexe par défaut."""
    return lp_solver.solve(lp)


# Instance globale du solveur LP
lp_solver = DenseSimplexSolver()
