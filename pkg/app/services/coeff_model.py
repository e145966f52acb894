"""
Coefficient Model Service
Surrogates represented by coefficients on the truncated tensor Legendre basis:
evaluation, variance and closed Sobol indices straight from the coefficients.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Mapping
import logging

import numpy as np

from app.errors import DegenerateSurrogateError, DimensionMismatchError, InvalidConstraintError
from app.services.legendre_basis import BasisConfig, design_matrix, enumerate_basis, support

logger = logging.getLogger(__name__)

Subset = FrozenSet[int]


@dataclass(frozen=True)
class CoeffVector:
    """Coefficients a_k, one per BasisIndex in enumerate_basis order"""

    a: np.ndarray
    cfg: BasisConfig

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.cfg.size,):
            raise DimensionMismatchError(f"expected {self.cfg.size} coefficients, got shape {a.shape}")
        object.__setattr__(self, "a", a)

    @classmethod
    def zeros(cls, cfg: BasisConfig) -> "CoeffVector":
        return cls(np.zeros(cfg.size), cfg)

    @classmethod
    def from_terms(cls, cfg: BasisConfig, terms: Mapping[tuple, float]) -> "CoeffVector":
        """Build from {BasisIndex: coefficient}; omitted indices are zero"""
        position = basis_positions(cfg)
        a = np.zeros(cfg.size)
        for k, value in terms.items():
            a[position[tuple(k)]] = value
        return cls(a, cfg)


@lru_cache(maxsize=32)
def basis_positions(cfg: BasisConfig) -> Dict[tuple, int]:
    return {k: i for i, k in enumerate(enumerate_basis(cfg))}


@lru_cache(maxsize=32)
def support_groups(cfg: BasisConfig) -> Dict[Subset, np.ndarray]:
    """Map each nonempty support set u to the basis positions k with support(k) = u"""
    groups: Dict[Subset, list] = {}
    for position, k in enumerate(enumerate_basis(cfg)):
        u = support(k)
        if u:
            groups.setdefault(u, []).append(position)
    return {u: np.array(positions, dtype=int) for u, positions in groups.items()}


def _check_subset(u: Iterable[int], d: int) -> Subset:
    u = frozenset(int(i) for i in u)
    if not u or min(u) < 1 or max(u) > d:
        raise InvalidConstraintError(f"subset {sorted(u)} must be a nonempty subset of 1..{d}")
    return u


def eval_surrogate(a: CoeffVector, x: np.ndarray) -> float:
    """Sum over k of a_k times the tensor basis function k at x"""
    x = np.asarray(x, dtype=float)
    if x.shape != (a.cfg.d,):
        raise DimensionMismatchError(f"point has shape {x.shape}, surrogate expects ({a.cfg.d},)")
    return float(design_matrix(x[None, :], a.cfg)[0] @ a.a)


def eval_surrogate_batch(a: CoeffVector, points: np.ndarray) -> np.ndarray:
    """Vectorized eval_surrogate over the rows of points"""
    return design_matrix(points, a.cfg) @ a.a


def mean(a: CoeffVector) -> float:
    return float(a.a[0])


def variance(a: CoeffVector) -> float:
    """Parseval: sum of squares of every non-constant coefficient"""
    return float(np.sum(a.a[1:] ** 2))


def group_energy(a: CoeffVector, U: Iterable[Iterable[int]]) -> float:
    """Unnormalized energy of the coefficients whose support is a member of U"""
    groups = support_groups(a.cfg)
    energy = 0.0
    for u in {_check_subset(u, a.cfg.d) for u in U}:
        positions = groups.get(u)
        if positions is not None:
            energy += float(np.sum(a.a[positions] ** 2))
    return energy


def sobol_index(a: CoeffVector, u: Iterable[int]) -> float:
    """Closed Sobol index S_u: energy with support exactly u over the variance"""
    var = variance(a)
    if var <= 0.0:
        raise DegenerateSurrogateError("Sobol index undefined for a surrogate with zero variance")
    return group_energy(a, [u]) / var


def total_index(a: CoeffVector, i: int) -> float:
    """Total index T_i: every closed index whose subset contains i"""
    _check_subset([i], a.cfg.d)
    var = variance(a)
    if var <= 0.0:
        raise DegenerateSurrogateError("Sobol index undefined for a surrogate with zero variance")
    members = [u for u in support_groups(a.cfg) if i in u]
    return group_energy(a, members) / var


def fit_least_squares(points: np.ndarray, values: np.ndarray, cfg: BasisConfig) -> CoeffVector:
    """Regression polynomial chaos fit of sampled values onto the truncated basis"""
    Psi = design_matrix(points, cfg)
    values = np.asarray(values, dtype=float)
    if Psi.shape[0] != values.shape[0]:
        raise DimensionMismatchError(f"{Psi.shape[0]} points but {values.shape[0]} values")
    if Psi.shape[0] < cfg.size:
        logger.warning(f"Underdetermined fit: {Psi.shape[0]} samples for {cfg.size} coefficients")
    coeffs, *_ = np.linalg.lstsq(Psi, values, rcond=None)
    return CoeffVector(coeffs, cfg)
