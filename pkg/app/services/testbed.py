"""
Testbed Service
Objective functions used by the experiments, the affine map between the
canonical box [-1, 1]^d and user boxes, and a registry addressed by id.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np
from pydantic import BaseModel, model_validator

from app.errors import DimensionMismatchError, DomainError, UnknownObjectiveError

logger = logging.getLogger(__name__)

ROSENBROCK_SCALE = 1.0 / 26000.0
CANONICAL_SLACK = 1e-12


class AffineBox(BaseModel):
    """User box [lo, hi]; canonical u maps to lo + (u + 1) / 2 * (hi - lo)"""

    lo: List[float]
    hi: List[float]

    @model_validator(mode="after")
    def check_bounds(self):
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be nonempty and of equal length")
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ValueError("lo must be strictly below hi in every coordinate")
        return self

    @classmethod
    def cube(cls, lo: float, hi: float, d: int) -> "AffineBox":
        return cls(lo=[lo] * d, hi=[hi] * d)

    @property
    def d(self) -> int:
        return len(self.lo)

    def to_box(self, u: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + (np.asarray(u, dtype=float) + 1.0) / 2.0 * (hi - lo)

    def to_canonical(self, X: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return 2.0 * (np.asarray(X, dtype=float) - lo) / (hi - lo) - 1.0


def _as_rows(U: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if d is not None and U.shape[1] != d:
        raise DimensionMismatchError(f"objective expects {d} coordinates, got {U.shape[1]}")
    return U


def _check_canonical(U: np.ndarray) -> None:
    if U.size and np.max(np.abs(U)) > 1.0 + CANONICAL_SLACK:
        raise DomainError("objective evaluated outside the canonical box [-1, 1]^d")


# ===========================================
# RAW OBJECTIVES (user-box coordinates)
# ===========================================

def rosenbrock3(X: np.ndarray) -> np.ndarray:
    """(1/26000) * sum_{m=1,2} 100 (X_{m+1} - X_m^2)^2 + (1 - X_m)^2"""
    X = _as_rows(X, 3)
    head, tail = X[:, :-1], X[:, 1:]
    return ROSENBROCK_SCALE * np.sum(100.0 * (tail - head ** 2) ** 2 + (1.0 - head) ** 2, axis=1)


def add2(X: np.ndarray) -> np.ndarray:
    X = _as_rows(X)
    return np.sqrt(3.0) * (X[:, 0] + X[:, 1])


def x1only(X: np.ndarray) -> np.ndarray:
    X = _as_rows(X)
    return X[:, 0] ** 2


def prod12(X: np.ndarray) -> np.ndarray:
    X = _as_rows(X)
    return 3.0 * X[:, 0] * X[:, 1]


@dataclass(frozen=True)
class ObjectiveSpec:
    """Registry entry: raw function on the user box plus known Sobol structure"""

    id: str
    fn: Callable[[np.ndarray], np.ndarray]
    d: int
    box: Tuple[float, float]
    min_d: int
    fixed_d: bool = False
    first_order: Optional[Tuple[float, ...]] = None
    total: Optional[Tuple[float, ...]] = None
    closed: Dict[Tuple[int, ...], float] = field(default_factory=dict)
    description: str = ""


# Analytic indices of the scaled Rosenbrock function from exact moments of U[-5, 5]
ROSENBROCK3_VARIANCE = 0.98277
ROSENBROCK3_FIRST_ORDER = (0.41848, 0.49010, 0.035679)
ROSENBROCK3_TOTAL = (0.44635, 0.54585, 0.063554)

OBJECTIVES: Dict[str, ObjectiveSpec] = {
    "rosenbrock3": ObjectiveSpec(
        id="rosenbrock3",
        fn=rosenbrock3,
        d=3,
        box=(-5.0, 5.0),
        min_d=3,
        fixed_d=True,
        first_order=ROSENBROCK3_FIRST_ORDER,
        total=ROSENBROCK3_TOTAL,
        closed={(1,): 0.41848, (2,): 0.49010, (3,): 0.035679, (1, 2): 0.027875, (2, 3): 0.027875,
                (1, 3): 0.0, (1, 2, 3): 0.0},
        description="3D Rosenbrock over [-5, 5]^3 scaled by 1/26000",
    ),
    "add2": ObjectiveSpec(
        id="add2", fn=add2, d=2, box=(-1.0, 1.0), min_d=2,
        first_order=(0.5, 0.5), total=(0.5, 0.5), closed={(1,): 0.5, (2,): 0.5, (1, 2): 0.0},
        description="sqrt(3) u_1 + sqrt(3) u_2",
    ),
    "x1only": ObjectiveSpec(
        id="x1only", fn=x1only, d=2, box=(-1.0, 1.0), min_d=1,
        first_order=(1.0, 0.0), total=(1.0, 0.0), closed={(1,): 1.0},
        description="u_1^2",
    ),
    "prod12": ObjectiveSpec(
        id="prod12", fn=prod12, d=2, box=(-1.0, 1.0), min_d=2,
        first_order=(0.0, 0.0), total=(1.0, 1.0), closed={(1,): 0.0, (2,): 0.0, (1, 2): 1.0},
        description="3 u_1 u_2",
    ),
}
ALIASES = {"rosenbrock3_scaled": "rosenbrock3"}


def get_objective_spec(objective_id: str) -> ObjectiveSpec:
    key = ALIASES.get(objective_id, objective_id)
    if key not in OBJECTIVES:
        known = ", ".join(sorted([*OBJECTIVES, *ALIASES]))
        raise UnknownObjectiveError(f"unknown objective '{objective_id}' (known: {known})")
    return OBJECTIVES[key]


def make_objective(objective_id: str, box: Optional[AffineBox] = None,
                   d: Optional[int] = None) -> Callable[[np.ndarray], np.ndarray]:
    """
    Objective on the canonical box: u -> fn(box.to_box(u)).
    Raises DomainError when evaluated outside [-1, 1]^d.
    """
    spec = get_objective_spec(objective_id)
    d = spec.d if d is None else d
    if d < spec.min_d:
        raise DimensionMismatchError(f"objective '{spec.id}' needs d >= {spec.min_d}, got {d}")
    if spec.fixed_d and d != spec.d:
        raise DimensionMismatchError(f"objective '{spec.id}' is defined for d = {spec.d} only")
    box = box or AffineBox.cube(spec.box[0], spec.box[1], d)
    if box.d != d:
        raise DimensionMismatchError(f"box has {box.d} coordinates, objective uses {d}")

    def objective(U: np.ndarray) -> np.ndarray:
        U = _as_rows(U, d)
        _check_canonical(U)
        return spec.fn(box.to_box(U))

    objective.__name__ = spec.id
    return objective


def make_additive(objective_id: str, d: Optional[int] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Synthetic objective with documented analytic Sobol indices (add2, x1only, prod12)"""
    if get_objective_spec(objective_id).id == "rosenbrock3":
        raise UnknownObjectiveError(f"'{objective_id}' is not a synthetic test function")
    return make_objective(objective_id, d=d)


def vectorize(point_fn: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], np.ndarray]:
    """Row-by-row wrapper turning f(u) -> float into the (n, d) -> (n,) objective form"""

    def objective(U: np.ndarray) -> np.ndarray:
        return np.array([float(point_fn(u)) for u in np.atleast_2d(np.asarray(U, dtype=float))])

    objective.__name__ = getattr(point_fn, "__name__", "objective")
    return objective


def rosenbrock3_scaled(u: np.ndarray) -> float:
    """Scaled Rosenbrock at a single canonical point (X = 5u); minimum 0 at u = (0.2, 0.2, 0.2)"""
    u = np.asarray(u, dtype=float)
    if u.shape != (3,):
        raise DimensionMismatchError(f"expected a point of shape (3,), got {u.shape}")
    return float(_ROSENBROCK3_CANONICAL(u[None, :])[0])


_ROSENBROCK3_CANONICAL = make_objective("rosenbrock3")
