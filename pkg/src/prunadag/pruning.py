"""A posteriori pruning and its robustness metrics.

Pruning zeroes small-magnitude components of a solution either below a
fixed threshold delta or down to a target sparsity fraction sigma
(fraction of components zeroed). Robustness is measured by
rho = ||g(x_pruned)|| and omega = sqrt(|f(x_pruned) - f(x)|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DivergedError, Problem


def prune_threshold(x: np.ndarray, delta: float) -> np.ndarray:
    """Zero every component with |x_i| strictly below delta.

    Components sitting exactly at delta survive.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < delta, 0.0, x)


def prune_to_sparsity(x: np.ndarray, sigma: float) -> tuple[np.ndarray, float]:
    """Zero exactly floor(sigma * n) smallest-magnitude components.

    Ties go to the lowest index. Returns the pruned vector and the
    magnitude of the largest zeroed component (0 when nothing was
    zeroed), which is the threshold that pruning-by-threshold would
    need to remove at least the same set.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    count = int(np.floor(sigma * n))
    if count == 0:
        return x.copy(), 0.0
    # stable sort on magnitude keeps the lowest-index tie-break
    order = np.argsort(np.abs(x), kind="stable")
    zeroed = order[:count]
    out = x.copy()
    out[zeroed] = 0.0
    return out, float(np.max(np.abs(x[zeroed])))


def robustness(x: np.ndarray, x_pruned: np.ndarray,
               problem: Problem) -> tuple[float, float]:
    """(rho, omega) = (||g(x_pruned)||, sqrt(|f(x_pruned) - f(x)|))."""
    g = problem.gradient(x_pruned)
    f_pruned = problem.value(x_pruned)
    f_orig = problem.value(x)
    if not (np.all(np.isfinite(g)) and np.isfinite(f_pruned) and np.isfinite(f_orig)):
        raise DivergedError("non-finite oracle output in robustness evaluation")
    rho = float(np.linalg.norm(g))
    omega = float(np.sqrt(abs(f_pruned - f_orig)))
    return rho, omega


@dataclass(frozen=True)
class PruneRow:
    target_kind: str       # "sigma" or "delta"
    target_value: float
    achieved_sparsity: float
    rho: float
    omega: float


def prune_report(x: np.ndarray, problem: Problem,
                 sigmas=(), deltas=()) -> list[PruneRow]:
    """Sweep pruning targets over a solution and collect metrics."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    rows = []
    for sigma in sigmas:
        xp, _ = prune_to_sparsity(x, sigma)
        rho, omega = robustness(x, xp, problem)
        rows.append(PruneRow("sigma", float(sigma),
                             float(np.mean(xp == 0.0)), rho, omega))
    for delta in deltas:
        xp = prune_threshold(x, delta)
        rho, omega = robustness(x, xp, problem)
        rows.append(PruneRow("delta", float(delta),
                             float(np.mean(xp == 0.0)), rho, omega))
    return rows
