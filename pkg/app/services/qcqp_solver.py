"""
QCQP Solver Service
Minimize c.z subject to A z = b and Euclidean-ball constraints
sum_{p in G_j} z_p^2 <= r_j, with infeasibility and unboundedness detection.

Equalities are eliminated through an SVD (particular solution plus orthonormal
null-space basis); directions of the null space that no ball touches are split
off (they either make the problem unbounded or do not move the objective), and
the remaining variables go through a log-barrier Newton method. Phase 1 uses
the same barrier machinery on a slack-relaxed problem.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg

from app.config import settings
from app.errors import DimensionMismatchError, NonFiniteInputError
from app.services.constraints import Ball

logger = logging.getLogger(__name__)

EQ_TOL = 1e-8
UNBOUNDED_TOL = 1e-9
NEWTON_TOL = 1e-12
QUADRATIC_REGION = 0.25
ARMIJO = 0.01
BACKTRACK = 0.5
MIN_STEP = 1e-14
MU_FACTOR = 10.0
PHASE1_MARGIN = 1e-6
INTERIOR_TOL = 1e-12
SHIFT = 1e-10


class SolveStatus(str, Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    MAX_ITER = "MAX_ITER"
    UNBOUNDED = "UNBOUNDED"


@dataclass
class QcqpProblem:
    """Linear objective c, equalities A z = b, and ball constraints on subsets of z"""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    balls: List[Ball] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float)
        self.A = A.reshape(0, self.c.shape[0]) if A.size == 0 else A
        self.b = np.asarray(self.b, dtype=float).reshape(-1)

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass
class QcqpSolution:
    status: SolveStatus
    value: float
    z: Optional[np.ndarray]
    kkt_residual: float = float("nan")
    gap: float = 0.0
    newton_steps: int = 0
    ball_multipliers: Optional[np.ndarray] = None
    eq_multipliers: Optional[np.ndarray] = None


def _validate(A: np.ndarray, b: np.ndarray, balls: Sequence[Ball], n: int) -> None:
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatchError(f"equality matrix has shape {A.shape}, expected (m, {n})")
    if b.shape != (A.shape[0],):
        raise DimensionMismatchError(f"right-hand side has shape {b.shape}, expected ({A.shape[0]},)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise NonFiniteInputError("equality data contains NaN or infinity")
    for ball in balls:
        positions = np.asarray(ball.positions)
        if positions.size and (positions.min() < 0 or positions.max() >= n):
            raise DimensionMismatchError(f"ball positions must lie in 0..{n - 1}")
        if not np.isfinite(ball.radius_sq):
            raise NonFiniteInputError("ball radius is not finite")
        if ball.radius_sq < 0:
            raise ValueError(f"ball radius_sq must be nonnegative, got {ball.radius_sq}")


class _BallSystem:
    """
    Ball constraints in reduced variables w:
    g_j(w) = ||p_j + M_j v||^2 - r_j (- s when a phase-1 slack is appended to v).
    """

    def __init__(self, offsets, maps, radii, slack: bool = False):
        self.offsets = offsets
        self.maps = maps
        self.radii = np.asarray(radii, dtype=float)
        self.slack = slack
        r = maps[0].shape[1] if maps else 0
        hess = np.zeros((len(maps), r + slack, r + slack))
        for j, Mj in enumerate(maps):
            hess[j, :r, :r] = 2.0 * Mj.T @ Mj
        self.hess = hess

    def _split(self, w):
        return (w[:-1], w[-1]) if self.slack else (w, 0.0)

    def values(self, w: np.ndarray) -> np.ndarray:
        v, s = self._split(w)
        return np.array([
            np.dot(res, res) for res in (p + Mj @ v for p, Mj in zip(self.offsets, self.maps))
        ]) - self.radii - s

    def evaluate(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v, s = self._split(w)
        g = np.empty(len(self.maps))
        J = np.zeros((len(self.maps), w.shape[0]))
        for j, (p, Mj) in enumerate(zip(self.offsets, self.maps)):
            res = p + Mj @ v
            g[j] = np.dot(res, res) - self.radii[j] - s
            J[j, :v.shape[0]] = 2.0 * Mj.T @ res
            if self.slack:
                J[j, -1] = -1.0
        return g, J


def _newton_direction(H: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        return -scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), grad)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return -scipy.linalg.lstsq(H, grad)[0]


def _center(system: _BallSystem, q: np.ndarray, w: np.ndarray, t: float, max_iter: int,
            stop: Optional[Callable[[np.ndarray], bool]] = None) -> Tuple[np.ndarray, int, bool]:
    """Newton's method on t*q.w - sum log(-g_j(w)); returns (w, steps, converged)"""
    g, J = system.evaluate(w)
    for step in range(1, max_iter + 1):
        inv = 1.0 / (-g)
        grad = t * q + J.T @ inv
        H = (J.T * inv ** 2) @ J + np.tensordot(inv, system.hess, axes=1)
        dw = _newton_direction(H, grad)
        decrement_sq = float(-grad @ dw)

        if decrement_sq / 2.0 <= NEWTON_TOL:
            # inside the Dikin ellipsoid the full step stays feasible
            if decrement_sq < QUADRATIC_REGION ** 2 and np.all(system.values(w + dw) < 0):
                w = w + dw
            return w, step, True

        if decrement_sq < QUADRATIC_REGION ** 2 and np.all(system.values(w + dw) < 0):
            w = w + dw
        else:
            # barrier change as a difference of logs
            alpha = 1.0
            while alpha > MIN_STEP:
                g_new = system.values(w + alpha * dw)
                if np.all(g_new < 0):
                    change = t * alpha * float(q @ dw) - float(np.sum(np.log(g_new / g)))
                    if change <= -ARMIJO * alpha * decrement_sq:
                        break
                alpha *= BACKTRACK
            else:
                logger.debug(f"Line search stalled at decrement {decrement_sq:.3e}")
                return w, step, True
            w = w + alpha * dw

        g, J = system.evaluate(w)
        if stop is not None and stop(w):
            return w, step, True
    return w, max_iter, False


def _barrier(system: _BallSystem, q: np.ndarray, w0: np.ndarray, tol: float, max_iter: int,
             stop: Optional[Callable[[np.ndarray], bool]] = None) -> Tuple[np.ndarray, float, int, SolveStatus]:
    """
    Barrier method: mu starts at 1 and is divided by 10 until (number of balls) * mu < tol.
    """
    m = len(system.radii)
    w, mu, total = w0.copy(), 1.0, 0
    while True:
        w, steps, converged = _center(system, q, w, 1.0 / mu, max_iter, stop)
        total += steps
        if stop is not None and stop(w):
            return w, mu, total, SolveStatus.OPTIMAL
        if not converged:
            return w, mu, total, SolveStatus.MAX_ITER
        if m * mu < tol:
            return w, mu, total, SolveStatus.OPTIMAL
        mu /= MU_FACTOR


class PreparedQcqp:
    """
    Everything about a QCQP except its objective: equality reduction, ball
    data in reduced variables and a phase-1 witness. solve(c) can then be
    called for many objectives.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, balls: Sequence[Ball], n: int,
                 rank_tol: Optional[float] = None, feasibility_tol: Optional[float] = None,
                 max_iter: Optional[int] = None):
        self.n = n
        A = np.asarray(A, dtype=float)
        self.A = A.reshape(0, n) if A.size == 0 else A
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.balls = list(balls)
        self.rank_tol = settings.RANK_TOL if rank_tol is None else rank_tol
        self.feasibility_tol = settings.FEASIBILITY_TOL if feasibility_tol is None else feasibility_tol
        self.max_iter = settings.SOLVER_MAX_ITER if max_iter is None else max_iter
        _validate(self.A, self.b, self.balls, n)

        self.phase1_steps = 0
        self.shift = 0.0
        self._v = None
        self.consistent = self._reduce_equalities()
        if not self.consistent:
            self.feasible = False
            logger.debug(f"Inconsistent equalities: residual {self.eq_residual:.3e}")
            return
        self._reduce_balls()
        self.feasible = self._phase1()

    # -------------------------------------------
    # Reductions
    # -------------------------------------------

    def _reduce_equalities(self) -> bool:
        n, m = self.n, self.A.shape[0]
        if m == 0:
            self.z0, self.Z, self.rank = np.zeros(n), np.eye(n), 0
            self.eq_residual = 0.0
            return True
        U, s, Vt = scipy.linalg.svd(self.A, full_matrices=True)
        rank = int(np.sum(s > self.rank_tol * s[0])) if s.size and s[0] > 0 else 0
        self.rank = rank
        self.z0 = Vt[:rank].T @ ((U[:, :rank].T @ self.b) / s[:rank])
        self.Z = Vt[rank:].T
        self.eq_residual = float(np.max(np.abs(self.A @ self.z0 - self.b)))
        return self.eq_residual <= EQ_TOL * (1.0 + float(np.max(np.abs(self.b))))

    def _reduce_balls(self) -> None:
        """Keep only null-space directions that move some ball: z = z0 + M v"""
        union = np.unique(np.concatenate([np.asarray(ball.positions, dtype=int) for ball in self.balls])) \
            if self.balls else np.array([], dtype=int)
        B = self.Z[union, :]
        if B.size:
            _, sb, Vbt = scipy.linalg.svd(B, full_matrices=False)
            rank = int(np.sum(sb > self.rank_tol * max(sb[0], 1.0))) if sb.size else 0
            self.W = Vbt[:rank].T
        else:
            self.W = np.zeros((self.Z.shape[1], 0))
        self.M = self.Z @ self.W
        self._system = _BallSystem(
            [self.z0[ball.positions] for ball in self.balls],
            [self.M[ball.positions, :] for ball in self.balls],
            [ball.radius_sq for ball in self.balls],
        )

    # -------------------------------------------
    # Phase 1
    # -------------------------------------------

    def _phase1(self) -> bool:
        r = self.M.shape[1]
        if not self.balls:
            self._v = np.zeros(r)
            return True
        v = np.zeros(r)
        violation = float(np.max(self._system.values(v)))
        if violation >= -PHASE1_MARGIN and r > 0:
            slack_system = _BallSystem(self._system.offsets, self._system.maps, self._system.radii, slack=True)
            w0 = np.append(v, violation + 1.0)
            q = np.zeros(r + 1)
            q[-1] = 1.0
            w, _, steps, status = _barrier(
                slack_system, q, w0, tol=self.feasibility_tol / 10.0, max_iter=self.max_iter,
                stop=lambda w: float(np.max(self._system.values(w[:-1]))) < -PHASE1_MARGIN,
            )
            self.phase1_steps = steps
            if status == SolveStatus.MAX_ITER:
                logger.warning(f"Phase 1 hit the Newton cap ({self.max_iter} steps per stage)")
            v = w[:-1]
            violation = float(np.max(self._system.values(v)))

        if violation > self.feasibility_tol:
            logger.debug(f"Phase 1: infeasible, minimal ball violation {violation:.3e}")
            return False
        if violation > -INTERIOR_TOL:
            # no room inside: inflate radii by a sliver so the barrier can start
            self.shift = max(violation, 0.0) + SHIFT
            self._system = _BallSystem(self._system.offsets, self._system.maps, self._system.radii + self.shift)
        self._v = v
        return True

    def witness(self) -> Optional[np.ndarray]:
        """A point satisfying the equalities and every ball, or None when infeasible"""
        if not self.feasible:
            return None
        return self.z0 + self.M @ self._v

    # -------------------------------------------
    # Phase 2
    # -------------------------------------------

    def solve(self, c: np.ndarray, tol: Optional[float] = None) -> QcqpSolution:
        tol = settings.SOLVER_TOL if tol is None else tol
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n,):
            raise DimensionMismatchError(f"objective has shape {c.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(c)):
            raise NonFiniteInputError("objective contains NaN or infinity")
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {tol}")

        if not self.feasible:
            return QcqpSolution(SolveStatus.INFEASIBLE, float("inf"), None)

        q_null = self.Z.T @ c
        q = self.W.T @ q_null
        free = q_null - self.W @ q
        if np.linalg.norm(free) > UNBOUNDED_TOL * (1.0 + np.linalg.norm(c)):
            return QcqpSolution(SolveStatus.UNBOUNDED, float("-inf"), None)

        v, mu, steps, status = self._v, 0.0, 0, SolveStatus.OPTIMAL
        if v.size and np.linalg.norm(q) > UNBOUNDED_TOL * (1.0 + np.linalg.norm(c)):
            v, mu, steps, status = _barrier(self._system, q, self._v, tol=tol, max_iter=self.max_iter)
            if status == SolveStatus.MAX_ITER:
                logger.warning(f"Solver hit the Newton cap ({self.max_iter} steps per stage) at mu={mu:.1e}")

        z = self.z0 + self.M @ v
        gap = len(self.balls) * mu
        solution = QcqpSolution(status, float(c @ z), z, gap=gap, newton_steps=steps)
        self._attach_multipliers(solution, c, v, mu)
        return solution

    def _attach_multipliers(self, solution: QcqpSolution, c: np.ndarray, v: np.ndarray, mu: float) -> None:
        """Multipliers recovered from the barrier: lambda_j = mu / -g_j, nu by least squares"""
        z = solution.z
        if self.balls and mu > 0:
            lam = mu / (-self._system.values(v))
        else:
            lam = np.zeros(len(self.balls))
        stationarity = c.copy()
        for lam_j, ball in zip(lam, self.balls):
            stationarity[ball.positions] += 2.0 * lam_j * z[ball.positions]
        if self.A.shape[0]:
            nu = scipy.linalg.lstsq(self.A.T, -stationarity)[0]
            stationarity = stationarity + self.A.T @ nu
        else:
            nu = np.zeros(0)
        solution.ball_multipliers = lam
        solution.eq_multipliers = nu
        solution.kkt_residual = float(np.max(np.abs(stationarity))) if stationarity.size else 0.0


def phase1(p: QcqpProblem) -> Tuple[bool, Optional[np.ndarray]]:
    """Feasibility of the equalities and balls, with a witness point when feasible"""
    _validate(p.A, p.b, p.balls, p.n)
    prepared = PreparedQcqp(p.A, p.b, p.balls, p.n)
    return prepared.feasible, prepared.witness()


def solve(p: QcqpProblem, tol: Optional[float] = None) -> QcqpSolution:
    """Solve the QCQP to a duality gap below tol"""
    prepared = PreparedQcqp(p.A, p.b, p.balls, p.n)
    return prepared.solve(p.c, tol)
