"""
Optimizer Service
Sequential minimization by rejection sampling: uniform proposals on [-1, 1]^d
are evaluated only when the certification subproblem shows some consistent
surrogate dipping below the incumbent there.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional
import logging

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.errors import ObjectiveEvaluationError
from app.services.constraints import SobolConstraint, compile_constraints
from app.services.legendre_basis import BasisConfig
from app.services.qcqp_solver import SolveStatus
from app.services.subproblem import Certifier, History

logger = logging.getLogger(__name__)

# f(U) -> y with U of shape (n, d) in the canonical box
Objective = Callable[[np.ndarray], np.ndarray]


class Termination(str, Enum):
    BUDGET = "BUDGET"
    MODEL_INCONSISTENT = "MODEL_INCONSISTENT"


class RunConfig(BaseModel):
    """One optimizer run"""

    d: int = Field(ge=1)
    D: int = Field(default_factory=lambda: settings.DEGREE, ge=1)
    budget_solves: int = Field(default_factory=lambda: settings.BUDGET_SOLVES, ge=1)
    constraints: List[SobolConstraint] = Field(default_factory=list)
    seed: int = 0
    max_consecutive_infeasible: int = Field(default_factory=lambda: settings.MAX_CONSECUTIVE_INFEASIBLE, ge=1)
    solver_tol: float = Field(default_factory=lambda: settings.SOLVER_TOL, gt=0)

    @property
    def basis(self) -> BasisConfig:
        return BasisConfig(d=self.d, D=self.D)


@dataclass
class Certification:
    """One proposal and its verdict, passed to run callbacks"""

    proposal: np.ndarray
    bound: float
    status: SolveStatus
    accepted: bool
    incumbent: float


@dataclass
class RunResult:
    n_eval: int
    m_best: float
    history: History
    solves_used: int
    termination: Termination
    accepted_bounds: List[float] = field(default_factory=list)
    n_rejected: int = 0
    n_infeasible: int = 0
    seed: int = 0

    @property
    def x_best(self) -> Optional[np.ndarray]:
        return self.history.argmin


def propose(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform draw on [-1, 1]^d"""
    return rng.uniform(-1.0, 1.0, size=d)


def _evaluate(f: Objective, x: np.ndarray) -> float:
    y = float(np.asarray(f(x[None, :]), dtype=float).reshape(-1)[0])
    if not np.isfinite(y):
        raise ObjectiveEvaluationError(f"objective returned {y} at x = {x.tolist()}")
    return y


def run(f: Objective, cfg: RunConfig, callback: Optional[Callable[[Certification], None]] = None) -> RunResult:
    """
    Minimize f over [-1, 1]^d.

    f is vectorized: it maps an (n, d) array of canonical points to n values
    and is called here with n = 1. Wrap a point-wise function such as
    testbed.rosenbrock3_scaled with testbed.vectorize first.

    X^1 is drawn uniformly and evaluated without a solve. Every later proposal
    costs one certification solve; it is evaluated only when the certified
    lower bound is strictly below the incumbent.
    """
    basis = cfg.basis
    cc = compile_constraints(cfg.constraints, basis)
    certifier = Certifier(cc, basis, tol=cfg.solver_tol)
    rng = np.random.default_rng(cfg.seed)
    history = History(d=cfg.d)

    logger.info(
        f"🚀 Run seed={cfg.seed}: d={cfg.d}, D={cfg.D}, budget={cfg.budget_solves}, "
        f"{len(cfg.constraints)} constraints ({len(cc.eliminated)} eliminated positions)"
    )

    x = propose(rng, cfg.d)
    history.append(x, _evaluate(f, x))

    solves_used = 0
    consecutive_infeasible = 0
    accepted_bounds: List[float] = []
    n_rejected = n_infeasible = 0
    termination = Termination.BUDGET

    while solves_used < cfg.budget_solves:
        x = propose(rng, cfg.d)
        bound = certifier.lower_bound(x, history)
        solves_used += 1
        incumbent = history.best

        if bound.status == SolveStatus.INFEASIBLE:
            n_infeasible += 1
            consecutive_infeasible += 1
        else:
            consecutive_infeasible = 0

        accepted = bound.status != SolveStatus.INFEASIBLE and bound.value < incumbent
        logger.debug(
            f"Proposal {solves_used}: m(x)={bound.value:.6g} ({bound.status.value}), "
            f"incumbent={incumbent:.6g} -> {'accept' if accepted else 'reject'}"
        )
        if callback is not None:
            callback(Certification(x, bound.value, bound.status, accepted, incumbent))

        if accepted:
            assert bound.value < incumbent, "accepted a proposal without a certified improvement"
            history.append(x, _evaluate(f, x))
            accepted_bounds.append(bound.value)
        else:
            n_rejected += 1

        if consecutive_infeasible >= cfg.max_consecutive_infeasible:
            logger.warning(
                f"⚠️ {consecutive_infeasible} consecutive infeasible certifications: the truncated "
                f"constrained class cannot interpolate the {len(history)} evaluations"
            )
            termination = Termination.MODEL_INCONSISTENT
            break

    result = RunResult(
        n_eval=len(history),
        m_best=history.best,
        history=history,
        solves_used=solves_used,
        termination=termination,
        accepted_bounds=accepted_bounds,
        n_rejected=n_rejected,
        n_infeasible=n_infeasible,
        seed=cfg.seed,
    )
    logger.info(
        f"✅ Run seed={cfg.seed} finished ({termination.value}): n_eval={result.n_eval}, "
        f"m_best={result.m_best:.6g}, solves_used={solves_used}"
    )
    return result
