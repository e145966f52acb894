"""
Certification Subproblem Service
Lower bound m(x) = min over truncated surrogates consistent with the history
and the compiled Sobol constraints of the surrogate value at x.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional
import logging

import numpy as np

from app.config import settings
from app.errors import DimensionMismatchError, DomainError
from app.services.constraints import Ball, CompiledConstraints
from app.services.legendre_basis import BasisConfig, design_matrix
from app.services.qcqp_solver import PreparedQcqp, QcqpSolution, SolveStatus

logger = logging.getLogger(__name__)


@dataclass
class History:
    """Evaluated points (canonical box) in evaluation order and the incumbent"""

    d: int
    points: List[np.ndarray] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    best: float = float("inf")

    def append(self, x: np.ndarray, y: float) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatchError(f"point has shape {x.shape}, history expects ({self.d},)")
        if np.max(np.abs(x)) > 1.0 + 1e-12:
            raise DomainError(f"history point {x.tolist()} lies outside [-1, 1]^{self.d}")
        self.points.append(x.copy())
        self.values.append(float(y))
        self.best = min(self.best, float(y))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def X(self) -> np.ndarray:
        return np.array(self.points).reshape(-1, self.d)

    @property
    def y(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    @property
    def argmin(self) -> Optional[np.ndarray]:
        if not self.points:
            return None
        return self.points[int(np.argmin(self.values))]

    @classmethod
    def from_arrays(cls, X: np.ndarray, y: np.ndarray) -> "History":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        history = cls(d=X.shape[1])
        for x, value in zip(X, np.asarray(y, dtype=float)):
            history.append(x, value)
        return history


class LowerBound(NamedTuple):
    value: float
    status: SolveStatus


class Certifier:
    """
    Builds the certification QCQP over surviving (non-eliminated) basis
    positions. The prepared equality reduction and phase-1 witness depend only
    on the history, so they are rebuilt only when the evaluated points or values
    change.
    """

    def __init__(self, cc: CompiledConstraints, cfg: BasisConfig, tol: Optional[float] = None):
        if cc.cfg != cfg:
            raise DimensionMismatchError(f"constraints compiled for {cc.cfg}, certifier built for {cfg}")
        self.cfg = cfg
        self.cc = cc
        self.tol = settings.SOLVER_TOL if tol is None else tol
        self.surviving = cc.surviving
        local = {p: i for i, p in enumerate(self.surviving)}
        self.balls = [
            Ball(np.array([local[p] for p in ball.positions], dtype=int), ball.radius_sq)
            for ball in cc.all_balls
        ]
        self._prepared: Optional[PreparedQcqp] = None
        self._prepared_X: Optional[np.ndarray] = None
        self._prepared_y: Optional[np.ndarray] = None
        self.last_solution: Optional[QcqpSolution] = None

    def _is_cached(self, X: np.ndarray, y: np.ndarray) -> bool:
        return (
            self._prepared is not None
            and np.array_equal(self._prepared_X, X)
            and np.array_equal(self._prepared_y, y)
        )

    def _prepare(self, h: History) -> PreparedQcqp:
        X, y = h.X, h.y
        if not self._is_cached(X, y):
            A = design_matrix(X, self.cfg)[:, self.surviving] if len(h) else np.zeros((0, self.surviving.size))
            self._prepared = PreparedQcqp(A, y, self.balls, n=self.surviving.size)
            self._prepared_X, self._prepared_y = X, y
            if not self._prepared.feasible:
                logger.debug(f"No consistent truncated surrogate for {len(h)} evaluations")
        return self._prepared

    def objective(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cfg.d,):
            raise DimensionMismatchError(f"query has shape {x.shape}, expected ({self.cfg.d},)")
        return design_matrix(x[None, :], self.cfg)[0, self.surviving]

    def lower_bound(self, x: np.ndarray, h: History) -> LowerBound:
        """
        m(x); +inf when no consistent surrogate exists, -inf when unbounded below
        or when the solver stops at the Newton cap before certifying a bound
        """
        c = self.objective(x)
        prepared = self._prepare(h)
        solution = prepared.solve(c, self.tol)
        self.last_solution = solution
        if solution.status == SolveStatus.UNBOUNDED:
            return LowerBound(float("-inf"), solution.status)
        if solution.status == SolveStatus.INFEASIBLE:
            return LowerBound(float("inf"), solution.status)
        if solution.status == SolveStatus.MAX_ITER:
            # an uncentered iterate certifies nothing, so x stays a candidate
            logger.warning(f"Certification at {x.tolist()} stopped at the Newton cap; no bound certified")
            return LowerBound(float("-inf"), solution.status)
        return LowerBound(solution.value, solution.status)

    def is_improving(self, x: np.ndarray, h: History) -> bool:
        """True iff some consistent surrogate goes strictly below the incumbent at x"""
        return _improves(self.lower_bound(x, h), h)


def _improves(bound: LowerBound, h: History) -> bool:
    if bound.status == SolveStatus.INFEASIBLE:
        return False
    return bound.value < h.best


def lower_bound(x: np.ndarray, h: History, cc: CompiledConstraints, cfg: BasisConfig,
                tol: Optional[float] = None) -> LowerBound:
    """One-shot certification of x (no caching across calls)"""
    return Certifier(cc, cfg, tol).lower_bound(x, h)


def is_improving(x: np.ndarray, h: History, cc: CompiledConstraints, cfg: BasisConfig,
                 tol: Optional[float] = None) -> bool:
    if len(h) == 0:
        raise ValueError("is_improving needs at least one evaluation in the history")
    return _improves(lower_bound(x, h, cc, cfg, tol), h)
