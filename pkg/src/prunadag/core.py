"""Shared numeric and problem abstractions.

Everything downstream (optimizers, problem generators, verification
passes) works in terms of the small vocabulary defined here: a
:class:`Problem` (gradient/objective oracle pair), sorted integer index
sets, masked Euclidean norms, and the :class:`RunRecord` trace that a
completed optimizer run leaves behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DivergedError(RuntimeError):
    """Raised when an oracle returns a non-finite value mid-run.

    The partial trace collected up to the failing iteration is attached
    as ``record`` when available.
    """

    def __init__(self, message: str, record: Optional["RunRecord"] = None):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class Problem:
    """A black-box optimization problem over a real n-vector.

    The objective oracle exists for verification and pruning metrics
    only; the optimizers themselves consume gradients exclusively.
    ``lipschitz``, when provided, is a (possibly loose) upper bound on
    the gradient's Lipschitz constant.
    """

    dim: int
    grad: Callable[[np.ndarray], np.ndarray]
    objective: Callable[[np.ndarray], float]
    lipschitz: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError("lipschitz bound must be nonnegative")

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self.grad(x), dtype=np.float64)
        if g.shape != (self.dim,):
            raise ValueError(
                f"gradient oracle returned shape {g.shape}, expected ({self.dim},)"
            )
        return g

    def value(self, x: np.ndarray) -> float:
        return float(self.objective(x))


def index_set(indices, n: int) -> np.ndarray:
    """Validate and canonicalize an index set: sorted, distinct, in [0, n)."""
    s = np.asarray(sorted(indices), dtype=np.int64)
    if s.size:
        if s[0] < 0 or s[-1] >= n:
            raise ValueError(f"index out of range [0, {n})")
        if np.any(np.diff(s) == 0):
            raise ValueError("index set contains duplicates")
    return s


def masked_norm(v: np.ndarray, s) -> float:
    """Euclidean norm of ``v`` restricted to the indices in ``s``.

    Returns 0 for an empty set. Indices must be valid for ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    s = np.asarray(s, dtype=np.int64)
    if s.size == 0:
        return 0.0
    if s.min() < 0 or s.max() >= v.shape[0]:
        raise IndexError(f"index set out of range for vector of length {v.shape[0]}")
    return float(np.sqrt(np.sum(v[s] ** 2)))


@dataclass
class RunRecord:
    """Per-iteration trace of an optimizer run.

    All arrays have length equal to the number of iterations performed.
    ``grad_norm[j]`` etc. refer to quantities at iterate ``x_j`` before
    the j-th step was taken. The theory columns (``sum_*``) carry the
    masked sums needed by the descent-lemma check and are only filled
    by the optimizers that maintain split weight vectors.
    """

    grad_norm: np.ndarray
    grad_norm_opt: np.ndarray
    below_delta: np.ndarray
    card_R: np.ndarray
    card_A: np.ndarray
    card_D: np.ndarray
    max_abs_x: np.ndarray
    x_final: np.ndarray
    reason: str
    objective: Optional[np.ndarray] = None
    objective_final: Optional[float] = None
    sum_gO2_over_wO: Optional[np.ndarray] = None
    sum_gO2_over_wO2: Optional[np.ndarray] = None
    sum_xD2_over_wD2: Optional[np.ndarray] = None
    history: Optional[list] = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return int(self.grad_norm.shape[0])

    def validate(self) -> None:
        n_iter = self.iterations
        arrays = [
            self.grad_norm, self.grad_norm_opt, self.below_delta,
            self.card_R, self.card_A, self.card_D, self.max_abs_x,
        ]
        if self.objective is not None:
            arrays.append(self.objective)
        for a in arrays:
            if a.shape[0] != n_iter:
                raise ValueError("trace arrays have inconsistent lengths")
        n = self.x_final.shape[0]
        if np.any(self.card_R + self.card_A + self.card_D != n):
            raise ValueError("set cardinalities do not partition {0..n-1}")


def finite_difference_gradient(problem: Problem, x: np.ndarray,
                               rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with per-component step h = rel_step*(1+|x_i|).

    Independent oracle used to validate analytic gradients.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        h = rel_step * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (problem.value(x + e) - problem.value(x - e)) / (2.0 * h)
    return g
