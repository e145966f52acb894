"""
Sobol Constraint Service
Declarative Sobol-index bounds and their compilation into Euclidean-ball
constraints and variable eliminations on the coefficient vector.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Literal, Optional, Sequence, Tuple
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.errors import InvalidConstraintError
from app.services.coeff_model import CoeffVector, support_groups
from app.services.legendre_basis import BasisConfig

logger = logging.getLogger(__name__)

BALL_TOL = 1e-9
ELIMINATION_TOL = 1e-12

PresetTag = Literal["A", "B", "C", "D"]


class SobolConstraint(BaseModel):
    """
    Sum over u in family of S_u <= bound.
    A bound of 0 eliminates every coefficient whose support is in the family.
    """

    model_config = ConfigDict(frozen=True)

    family: Tuple[Tuple[int, ...], ...]
    bound: float = Field(ge=0.0, le=1.0)

    @field_validator("family", mode="before")
    @classmethod
    def normalize_family(cls, value):
        members = set()
        try:
            subsets = [tuple(sorted({int(i) for i in u})) for u in value]
        except TypeError as exc:
            raise ValueError(f"family must be a list of variable lists such as [[1], [1, 2]], got {value!r}") from exc
        for u in subsets:
            if not u:
                raise ValueError("family members must be nonempty subsets")
            if u[0] < 1:
                raise ValueError(f"variables are numbered from 1, got {list(u)}")
            members.add(u)
        if not members:
            raise ValueError("family must contain at least one subset")
        return tuple(sorted(members, key=lambda u: (len(u), u)))

    @property
    def is_elimination(self) -> bool:
        return self.bound == 0.0


def sobol(*members: Sequence[int], bound: float) -> SobolConstraint:
    """Shorthand: sobol([1], [1, 2], bound=0.47)"""
    return SobolConstraint(family=members, bound=bound)


@dataclass(frozen=True)
class Ball:
    """sum over positions p of a_p^2 <= radius_sq"""

    positions: np.ndarray
    radius_sq: float

    def energy(self, a: np.ndarray) -> float:
        return float(np.sum(a[self.positions] ** 2))


@dataclass(frozen=True)
class CompiledConstraints:
    """Basis positions forced to zero, Sobol balls, and the unit-variance ball"""

    cfg: BasisConfig
    eliminated: frozenset
    balls: List[Ball] = field(default_factory=list)
    variance_ball: Optional[Ball] = None

    @property
    def all_balls(self) -> List[Ball]:
        return [*self.balls, self.variance_ball]

    @property
    def surviving(self) -> np.ndarray:
        """Positions not eliminated, in basis order (position 0 always survives)"""
        return np.array([p for p in range(self.cfg.size) if p not in self.eliminated], dtype=int)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompiledConstraints):
            return NotImplemented
        return (
            self.cfg == other.cfg
            and self.eliminated == other.eliminated
            and len(self.all_balls) == len(other.all_balls)
            and all(
                np.array_equal(mine.positions, theirs.positions) and mine.radius_sq == theirs.radius_sq
                for mine, theirs in zip(self.all_balls, other.all_balls)
            )
        )


def _family_positions(constraint: SobolConstraint, cfg: BasisConfig) -> np.ndarray:
    groups = support_groups(cfg)
    positions = []
    for u in constraint.family:
        if min(u) < 1 or max(u) > cfg.d:
            raise InvalidConstraintError(f"subset {list(u)} is not a subset of 1..{cfg.d}")
        members = groups.get(frozenset(u))
        if members is not None:
            positions.extend(members.tolist())
    return np.array(sorted(set(positions)), dtype=int)


def compile_constraints(constraints: Sequence[SobolConstraint], cfg: BasisConfig) -> CompiledConstraints:
    """
    Turn Sobol constraints into solver constraints.

    Zero bounds become eliminations; positive bounds become balls of
    radius_sq = bound; the unit-variance ball over every surviving
    non-constant position is always present. Overlapping families stay
    separate balls.
    """
    eliminated = set()
    for constraint in constraints:
        if constraint.is_elimination:
            eliminated.update(_family_positions(constraint, cfg).tolist())

    balls = []
    for constraint in constraints:
        if constraint.is_elimination:
            continue
        positions = np.array(
            [p for p in _family_positions(constraint, cfg) if p not in eliminated], dtype=int
        )
        if positions.size == 0:
            logger.debug(f"Dropping ball for family {constraint.family}: every position eliminated")
            continue
        balls.append(Ball(positions, float(constraint.bound)))

    variance_positions = np.array([p for p in range(1, cfg.size) if p not in eliminated], dtype=int)
    compiled = CompiledConstraints(
        cfg=cfg,
        eliminated=frozenset(eliminated),
        balls=balls,
        variance_ball=Ball(variance_positions, 1.0),
    )
    logger.debug(
        f"Compiled {len(constraints)} constraints: {len(eliminated)} eliminated, "
        f"{len(balls)} Sobol balls, variance ball over {variance_positions.size} positions"
    )
    return compiled


def is_feasible(a: CoeffVector, cc: CompiledConstraints) -> bool:
    """Ball energies within BALL_TOL of their radius and eliminated entries numerically zero"""
    eliminated = np.array(sorted(cc.eliminated), dtype=int)
    if eliminated.size and np.max(np.abs(a.a[eliminated])) > ELIMINATION_TOL:
        return False
    return all(ball.energy(a.a) <= ball.radius_sq + BALL_TOL for ball in cc.all_balls)


def total_family(i: int, d: int, pairs_only: bool = True) -> List[Tuple[int, ...]]:
    """
    Subsets counted in the total index of variable i.

    pairs_only=True gives {i} and every pair containing i, the form in which
    the experiment-B totals are written; False gives every subset containing i.
    """
    others = [j for j in range(1, d + 1) if j != i]
    sizes = range(0, 2) if pairs_only else range(0, d)
    return [tuple(sorted((i, *rest))) for size in sizes for rest in combinations(others, size)]


def experiment_preset(tag: str) -> List[SobolConstraint]:
    """Constraint lists of experiments A-D on the scaled 3D Rosenbrock function"""
    tag = tag.upper()
    if tag not in ("A", "B", "C", "D"):
        raise InvalidConstraintError(f"unknown preset '{tag}', expected one of A, B, C, D")

    first_order = [sobol([1], bound=0.42), sobol([2], bound=0.46), sobol([3], bound=0.004)]
    totals = [
        sobol([1], [1, 2], [1, 3], bound=0.47),
        sobol([2], [1, 2], [2, 3], bound=0.56),
        sobol([3], [1, 3], [2, 3], bound=0.06),
    ]
    no_13_interaction = [sobol([1, 3], bound=0.0), sobol([1, 2, 3], bound=0.0)]

    presets = {
        "A": [],
        "B": first_order + totals,
        "C": first_order + totals + no_13_interaction,
        "D": no_13_interaction,
    }
    return presets[tag]
