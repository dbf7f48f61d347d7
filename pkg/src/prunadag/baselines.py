"""Baselines: textbook Adagrad and deterministic Frank-Wolfe.

Adagrad exists standalone (not just as the T = n degenerate case of the
pruning-aware optimizer) so that the equivalence between the two is a
meaningful cross-implementation test.

The Frank-Wolfe variants operate over the T-support-norm-ball of radius
tau: the convex hull of vectors with at most T nonzeros and Euclidean
norm at most tau. The linear minimization oracle has a closed form that
places mass on the T largest-magnitude gradient components.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DivergedError, Problem, RunRecord
from .optimizer import DEFAULT_GRAD_TOL, DEFAULT_MAX_ITERS, DEFAULT_VARSIGMA
from .steps import relevant_mask


def adagrad_step(x: np.ndarray, g: np.ndarray, w_prev: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray]:
    """One Adagrad update: w = sqrt(w_prev^2 + g^2), x - g/w."""
    w = np.sqrt(w_prev ** 2 + g ** 2)
    return x + (-g / w), w


def adagrad_run(problem: Problem, x0: np.ndarray,
                varsigma: float = DEFAULT_VARSIGMA,
                grad_tol: float = DEFAULT_GRAD_TOL,
                max_iters: int = DEFAULT_MAX_ITERS,
                delta_trace: float = 1e-3,
                record_objective: bool = True) -> RunRecord:
    """Standalone Adagrad loop producing the common trace format."""
    x = np.array(x0, dtype=np.float64)
    n = x.shape[0]
    w = np.full(n, np.sqrt(varsigma))
    grad_norms, below, objective, max_abs = [], [], [], []
    reason = "max iterations"
    for _ in range(max_iters):
        g = problem.gradient(x)
        if not np.all(np.isfinite(g)):
            raise DivergedError("non-finite gradient in adagrad run")
        if record_objective:
            objective.append(problem.value(x))
        below.append(int(np.count_nonzero(np.abs(x) < delta_trace)))
        max_abs.append(float(np.max(np.abs(x))))
        gn = float(np.linalg.norm(g))
        grad_norms.append(gn)
        x, w = adagrad_step(x, g, w)
        if gn <= grad_tol:
            reason = "gradient tolerance"
            break
    k = len(grad_norms)
    gn_arr = np.array(grad_norms)
    trace = RunRecord(
        grad_norm=gn_arr, grad_norm_opt=gn_arr.copy(),
        below_delta=np.array(below, dtype=np.int64),
        card_R=np.full(k, n, dtype=np.int64),
        card_A=np.zeros(k, dtype=np.int64),
        card_D=np.zeros(k, dtype=np.int64),
        max_abs_x=np.array(max_abs), x_final=x, reason=reason,
        objective=np.array(objective) if record_objective else None,
    )
    if record_objective:
        trace.objective_final = problem.value(x)
    return trace


class FwRate(enum.Enum):
    LINEAR = "linear"        # eta_k = 1/(k+1)
    RESCALED = "rescaled"    # eta_k = min(beta*||g||_R / ||v - x||, 1)


@dataclass(frozen=True)
class FwConfig:
    """Frank-Wolfe parameters over the T-support-norm-ball."""

    T: int
    tau: float
    rate: FwRate = FwRate.LINEAR
    beta: float = 0.001

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.rate is FwRate.RESCALED and not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1) for the rescaled rate")


def fw_lmo(g: np.ndarray, cfg: FwConfig) -> np.ndarray:
    """Closed-form linear minimization oracle over the support-norm ball.

    Returns the vertex -tau * g_R / ||g||_R supported on the T
    largest-magnitude gradient components; returns 0 when that masked
    norm vanishes (stationary convention, keeps batch runs total).
    """
    v = np.zeros_like(g)
    mask = relevant_mask(g, min(cfg.T, g.shape[0]))
    norm_r = float(np.sqrt(np.sum(g[mask] ** 2)))
    if norm_r == 0.0:
        return v
    v[mask] = -cfg.tau * g[mask] / norm_r
    return v


def fw_step(x: np.ndarray, g: np.ndarray, k: int, cfg: FwConfig) -> np.ndarray:
    """x + eta_k (v_k - x) with the configured learning rate."""
    v = fw_lmo(g, cfg)
    if cfg.rate is FwRate.LINEAR:
        eta = 1.0 / (k + 1)
    else:
        diff = float(np.linalg.norm(v - x))
        if diff == 0.0:
            eta = 1.0
        else:
            mask = relevant_mask(g, min(cfg.T, g.shape[0]))
            norm_r = float(np.sqrt(np.sum(g[mask] ** 2)))
            eta = min(cfg.beta * norm_r / diff, 1.0)
    return x + eta * (v - x)


def fw_run(problem: Problem, x0: np.ndarray, cfg: FwConfig,
           grad_tol: float = DEFAULT_GRAD_TOL,
           max_iters: int = DEFAULT_MAX_ITERS,
           delta_trace: float = 1e-3,
           record_objective: bool = True) -> RunRecord:
    """Frank-Wolfe loop producing the common trace format."""
    x = np.array(x0, dtype=np.float64)
    n = x.shape[0]
    T = min(cfg.T, n)
    grad_norms, grad_norms_r, below, objective, max_abs = [], [], [], [], []
    reason = "max iterations"
    for k in range(max_iters):
        g = problem.gradient(x)
        if not np.all(np.isfinite(g)):
            raise DivergedError("non-finite gradient in frank-wolfe run")
        if record_objective:
            objective.append(problem.value(x))
        below.append(int(np.count_nonzero(np.abs(x) < delta_trace)))
        max_abs.append(float(np.max(np.abs(x))))
        gn = float(np.linalg.norm(g))
        grad_norms.append(gn)
        mask = relevant_mask(g, T)
        grad_norms_r.append(float(np.sqrt(np.sum(g[mask] ** 2))))
        x = fw_step(x, g, k, cfg)
        if gn <= grad_tol:
            reason = "gradient tolerance"
            break
    k = len(grad_norms)
    trace = RunRecord(
        grad_norm=np.array(grad_norms),
        grad_norm_opt=np.array(grad_norms_r),
        below_delta=np.array(below, dtype=np.int64),
        card_R=np.full(k, T, dtype=np.int64),
        card_A=np.zeros(k, dtype=np.int64),
        card_D=np.full(k, n - T, dtype=np.int64),
        max_abs_x=np.array(max_abs), x_final=x, reason=reason,
        objective=np.array(objective) if record_objective else None,
    )
    if record_objective:
        trace.objective_final = problem.value(x)
    return trace
