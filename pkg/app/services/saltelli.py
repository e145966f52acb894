"""
Saltelli Sensitivity Service
Pick-freeze Monte-Carlo estimates of first-order (Saltelli 2010 form) and total
(Jansen form) Sobol indices of a black-box objective on [-1, 1]^d.
"""
from dataclasses import dataclass
from typing import List, Optional
import logging

import numpy as np

from app.errors import DegenerateEstimateError
from app.services.constraints import SobolConstraint, total_family

logger = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-3


@dataclass
class SensitivityEstimate:
    first_order: np.ndarray
    total: np.ndarray
    n_base: int
    total_evals: int
    variance: float
    first_order_se: np.ndarray
    total_se: np.ndarray

    @property
    def d(self) -> int:
        return self.first_order.shape[0]


def estimate(f, d: int, n_base: int, rng: np.random.Generator) -> SensitivityEstimate:
    """
    Estimate S_i and T_i from n_base * (d + 2) evaluations of f.

    f is vectorized over rows of an (n, d) array in the canonical box.
    Values are reported unclipped.
    """
    if n_base < 2:
        raise ValueError(f"n_base must be at least 2, got {n_base}")
    A = rng.uniform(-1.0, 1.0, size=(n_base, d))
    B = rng.uniform(-1.0, 1.0, size=(n_base, d))
    fA = np.asarray(f(A), dtype=float).reshape(-1)
    fB = np.asarray(f(B), dtype=float).reshape(-1)

    V = float(np.var(np.concatenate([fA, fB]), ddof=1))
    if not np.isfinite(V) or V <= 0.0:
        raise DegenerateEstimateError(f"output variance {V} is not positive; the objective looks constant")

    first, total, first_se, total_se = (np.empty(d) for _ in range(4))
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fABi = np.asarray(f(ABi), dtype=float).reshape(-1)
        first_terms = fB * (fABi - fA)
        total_terms = 0.5 * (fA - fABi) ** 2
        first[i] = first_terms.mean() / V
        total[i] = total_terms.mean() / V
        first_se[i] = first_terms.std(ddof=1) / np.sqrt(n_base) / V
        total_se[i] = total_terms.std(ddof=1) / np.sqrt(n_base) / V

    est = SensitivityEstimate(
        first_order=first,
        total=total,
        n_base=n_base,
        total_evals=n_base * (d + 2),
        variance=V,
        first_order_se=first_se,
        total_se=total_se,
    )
    if np.any(est.first_order < -0.05) or np.any(est.total > 1.05):
        logger.warning(f"Saltelli estimates far outside [0, 1] (n_base={n_base}); increase n_base")
    logger.debug(f"Saltelli n_base={n_base}: S={first.round(4).tolist()}, T={total.round(4).tolist()}")
    return est


def suggest_bounds(est: SensitivityEstimate, margin: float, assume_zero: bool = False,
                   full_total: bool = False) -> List[SobolConstraint]:
    """
    Conservative constraints from an estimate: bound = min(1, estimate * (1 + margin))
    for every singleton {i} and every total-index family of i.

    Without assume_zero, bounds are floored at ZERO_THRESHOLD so that a noisy
    near-zero estimate never turns into an elimination. With it, T_i below the
    threshold eliminates every subset containing i and S_i below it eliminates {i}.
    """
    if margin < 0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    if not (np.all(np.isfinite(est.first_order)) and np.all(np.isfinite(est.total))):
        raise DegenerateEstimateError("estimate contains non-finite indices")

    d = est.d
    floor = 0.0 if assume_zero else ZERO_THRESHOLD

    def bound_for(value: float) -> float:
        return float(np.clip(value * (1.0 + margin), floor, 1.0))

    constraints: List[SobolConstraint] = []
    for i in range(1, d + 1):
        S_i, T_i = float(est.first_order[i - 1]), float(est.total[i - 1])
        if assume_zero and T_i < ZERO_THRESHOLD:
            constraints.append(SobolConstraint(family=total_family(i, d, pairs_only=False), bound=0.0))
            continue
        if assume_zero and S_i < ZERO_THRESHOLD:
            constraints.append(SobolConstraint(family=[(i,)], bound=0.0))
        else:
            constraints.append(SobolConstraint(family=[(i,)], bound=bound_for(S_i)))
        if d > 1:
            constraints.append(
                SobolConstraint(family=total_family(i, d, pairs_only=not full_total), bound=bound_for(T_i))
            )
    return constraints


def format_table(est: SensitivityEstimate, names: Optional[List[str]] = None) -> str:
    names = names or [f"X{i + 1}" for i in range(est.d)]
    lines = [f"{'input':>6} {'S_i':>10} {'±se':>8} {'T_i':>10} {'±se':>8}"]
    for i, name in enumerate(names):
        lines.append(
            f"{name:>6} {est.first_order[i]:>10.4f} {est.first_order_se[i]:>8.4f} "
            f"{est.total[i]:>10.4f} {est.total_se[i]:>8.4f}"
        )
    return "\n".join(lines)
