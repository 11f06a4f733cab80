"""
Domain Entity: NLP
Programmes linéaires, problèmes non linéaires creux et résultats des solveurs
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse


class LpStatus(Enum):
    """Issue d'un programme linéaire"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """
    min cᵀx  s.c.  A_ub x ≤ b_ub,  A_eq x = b_eq,  lower ≤ x ≤ upper

    Les bornes peuvent être infinies; par défaut x ≥ 0.
    """
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub, self.b_ub = self._rows(self.A_ub, self.b_ub, n, "ub")
        self.A_eq, self.b_eq = self._rows(self.A_eq, self.b_eq, n, "eq")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must match the number of variables")

    @staticmethod
    def _rows(A, b, n: int, label: str) -> Tuple[np.ndarray, np.ndarray]:
        if A is None:
            return np.zeros((0, n)), np.zeros(0)
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape != (b.size, n):
            raise ValueError(f"A_{label} has shape {A.shape}, expected ({b.size}, {n})")
        return A, b

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray] = None
    value: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


@dataclass
class FormClosureResult:
    """Verdict de fermeture par friction, marge de la LP et forces certificat (repère local)"""
    is_closed: bool
    margin: float
    certificate: Optional[np.ndarray] = None
    rank: int = 0


@dataclass
class VariableLayout:
    """Blocs nommés du vecteur de décision aplati (ordre bloc par bloc)."""
    blocks: Dict[str, Tuple[int, Tuple[int, ...]]] = field(default_factory=dict)
    size: int = 0

    def add(self, name: str, shape: Tuple[int, ...]) -> slice:
        if name in self.blocks:
            raise ValueError(f"block {name!r} already declared")
        count = int(np.prod(shape)) if shape else 1
        self.blocks[name] = (self.size, tuple(shape))
        self.size += count
        return self.slice(name)

    def slice(self, name: str) -> slice:
        start, shape = self.blocks[name]
        return slice(start, start + (int(np.prod(shape)) if shape else 1))

    def view(self, z: np.ndarray, name: str) -> np.ndarray:
        _, shape = self.blocks[name]
        return np.asarray(z)[self.slice(name)].reshape(shape)

    def index(self, name: str, *idx: int) -> int:
        start, shape = self.blocks[name]
        return start + int(np.ravel_multi_index(idx, shape))


@dataclass
class NlpProblem:
    """
    Problème non linéaire creux: min f(z) s.c. h(z) = 0, g(z) ≥ 0, lower ≤ z ≤ upper.

    Les évaluateurs sont des fonctions pures; les jacobiennes sont des matrices scipy
    CSR de motif fixe. `eq_blocks` et `ineq_blocks` nomment les lignes.
    """
    n: int
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]]
    eq: Callable[[np.ndarray], np.ndarray]
    eq_jacobian: Callable[[np.ndarray], sparse.csr_matrix]
    ineq: Callable[[np.ndarray], np.ndarray]
    ineq_jacobian: Callable[[np.ndarray], sparse.csr_matrix]
    m_eq: int
    m_ineq: int
    eq_blocks: Dict[str, slice] = field(default_factory=dict)
    ineq_blocks: Dict[str, slice] = field(default_factory=dict)
    layout: Optional[VariableLayout] = None
    initial: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.size != self.n or self.upper.size != self.n:
            raise ValueError("bounds must have n entries")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound above upper bound")
        if not self.eq_blocks and self.m_eq:
            self.eq_blocks = {"equality": slice(0, self.m_eq)}
        if not self.ineq_blocks and self.m_ineq:
            self.ineq_blocks = {"inequality": slice(0, self.m_ineq)}

    def violation(self, z: np.ndarray) -> float:
        """Violation maximale des contraintes (bornes exclues)."""
        h = self.eq(z)
        g = self.ineq(z)
        worst = 0.0
        if h.size:
            worst = max(worst, float(np.max(np.abs(h))))
        if g.size:
            worst = max(worst, float(np.max(np.maximum(-g, 0.0))))
        return worst

    def block_violations(self, z: np.ndarray) -> Dict[str, float]:
        h = self.eq(z)
        g = self.ineq(z)
        out: Dict[str, float] = {}
        for name, rows in self.eq_blocks.items():
            vals = h[rows]
            out[name] = float(np.max(np.abs(vals))) if vals.size else 0.0
        for name, rows in self.ineq_blocks.items():
            vals = g[rows]
            out[name] = float(np.max(np.maximum(-vals, 0.0))) if vals.size else 0.0
        return out


class SolverStatus(Enum):
    """Issue d'une résolution NLP"""
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
    TIME_LIMIT = "time-limit"
    DIVERGED = "diverged"


@dataclass
class SolverOptions:
    """Options du Lagrangien augmenté"""
    constraint_tol: float = 1e-6
    optimality_tol: float = 1e-4
    max_outer_iterations: int = 50
    max_inner_iterations: int = 500
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e12
    time_limit: float = 600.0

    def __post_init__(self):
        if self.constraint_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_penalty <= 0 or self.penalty_growth <= 1.0:
            raise ValueError("penalty must be positive and grow by a factor above 1")
        if self.max_outer_iterations < 1 or self.max_inner_iterations < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    violation: float
    stationarity: float
    penalty: float
    inner_iterations: int
    elapsed: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "objective": self.objective,
            "violation": self.violation,
            "stationarity": self.stationarity,
            "penalty": self.penalty,
            "inner_iterations": self.inner_iterations,
            "elapsed": self.elapsed,
        }


@dataclass
class NlpSolution:
    status: SolverStatus
    z: np.ndarray
    objective: float
    violation: float
    stationarity: float
    iterations: int
    solve_time: float = 0.0
    multipliers_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    multipliers_ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    block_violations: Dict[str, float] = field(default_factory=dict)
    iteration_log: List[IterationRecord] = field(default_factory=list)
    clamped_start: bool = False
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == SolverStatus.CONVERGED


# Mesure d'erreur des contrôles de dérivées: relative au-delà de 1, absolue en dessous
DERIVATIVE_ERROR = "|a − d| / max(1, |a|, |d|)"


@dataclass
class BlockError:
    """Pire écart analytique / différences finies pour un bloc"""
    block: str
    error: float
    row: int
    col: int


@dataclass
class DerivativeReport:
    blocks: List[BlockError]

    @property
    def worst(self) -> BlockError:
        return self.blocks[0]

    def passed(self, tol: float = 1e-6) -> bool:
        return all(b.error < tol for b in self.blocks)
