"""
Normalized Legendre Basis Service
Legendre polynomials orthonormal under the uniform probability measure on [-1, 1],
and their tensor products truncated at a per-coordinate degree D.
"""
from functools import lru_cache
from itertools import product
from typing import Optional, Tuple, Union
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.errors import BasisSizeError, DimensionMismatchError, DomainError

logger = logging.getLogger(__name__)

# Per-coordinate degrees of one tensor basis function
BasisIndex = Tuple[int, ...]

DOMAIN_SLACK = 1e-12


class BasisConfig(BaseModel):
    """Input dimension d and maximal per-coordinate degree D"""

    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)
    D: int = Field(ge=1)

    @property
    def size(self) -> int:
        return (self.D + 1) ** self.d


def _check_domain(x: np.ndarray) -> None:
    if x.size and np.max(np.abs(x)) > 1.0 + DOMAIN_SLACK:
        raise DomainError(
            f"coordinates must lie in [-1, 1], got max |x| = {np.max(np.abs(x))!r} "
            "(map user-box points to the canonical box first)"
        )


def psi_table(x: Union[float, np.ndarray], D: int) -> np.ndarray:
    """
    Evaluate psi_0..psi_D at every entry of x.

    Returns an array of shape x.shape + (D+1,). Uses the three-term recurrence
    (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}, then scales by sqrt(2n+1).
    """
    x = np.asarray(x, dtype=float)
    _check_domain(x)
    table = np.empty(x.shape + (D + 1,))
    table[..., 0] = 1.0
    if D >= 1:
        table[..., 1] = x
    for n in range(1, D):
        table[..., n + 1] = ((2 * n + 1) * x * table[..., n] - n * table[..., n - 1]) / (n + 1)
    table *= np.sqrt(2.0 * np.arange(D + 1) + 1.0)
    return table


def eval_psi(n: int, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """psi_n(x) = sqrt(2n+1) P_n(x); E[psi_n psi_m] = delta_nm for X ~ U[-1, 1]"""
    if n < 0:
        raise ValueError(f"degree must be nonnegative, got {n}")
    values = psi_table(x, n)[..., n]
    return float(values) if np.ndim(values) == 0 else values


def eval_tensor(k: BasisIndex, x: np.ndarray) -> float:
    """Product of psi_{k_l}(x_l) over coordinates; 1 for the all-zeros index"""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(k) != x.shape[0]:
        raise DimensionMismatchError(f"index has {len(k)} coordinates, point has shape {x.shape}")
    if not k:
        return 1.0
    table = psi_table(x, max(k))
    return float(np.prod(table[np.arange(len(k)), list(k)]))


def support(k: BasisIndex) -> frozenset:
    """1-based coordinates carrying a nonzero degree"""
    return frozenset(ell + 1 for ell, deg in enumerate(k) if deg > 0)


def enumerate_basis(cfg: BasisConfig, cap: Optional[int] = None) -> Tuple[BasisIndex, ...]:
    """
    All (D+1)^d multi-indices in lexicographic order; position 0 is the
    all-zeros (constant) index.
    """
    cap = settings.BASIS_SIZE_CAP if cap is None else cap
    if cfg.size > cap:
        raise BasisSizeError(f"basis size (D+1)^d = {cfg.size} exceeds cap {cap} (d={cfg.d}, D={cfg.D})")
    return _enumerate(cfg)


@lru_cache(maxsize=32)
def _enumerate(cfg: BasisConfig) -> Tuple[BasisIndex, ...]:
    logger.debug(f"Enumerating tensor basis d={cfg.d}, D={cfg.D}")
    return tuple(product(range(cfg.D + 1), repeat=cfg.d))


@lru_cache(maxsize=32)
def basis_array(cfg: BasisConfig) -> np.ndarray:
    """enumerate_basis as an integer array of shape (size, d)"""
    indices = np.array(enumerate_basis(cfg), dtype=int).reshape(-1, cfg.d)
    indices.setflags(write=False)
    return indices


def design_matrix(points: np.ndarray, cfg: BasisConfig) -> np.ndarray:
    """
    Tensor basis values at each point.

    Args:
        points: (n, d) array in the canonical box

    Returns:
        (n, (D+1)^d) array, columns in enumerate_basis order
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != cfg.d:
        raise DimensionMismatchError(f"points have {points.shape[1]} coordinates, basis expects {cfg.d}")
    table = psi_table(points, cfg.D)  # (n, d, D+1)
    K = basis_array(cfg)
    values = table[:, np.arange(cfg.d), K]  # (n, size, d)
    return np.prod(values, axis=-1)


def gauss_legendre(n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights for the uniform probability measure on [-1, 1]"""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    return nodes, weights / 2.0
