"""The pruning-aware adaptive gradient optimizer.

Each iteration classifies the parameters into optimisable indices
(updated by an Adagrad-like step -g_i/w_i built from past optimisable
gradients) and decreasable indices (shrunk toward zero by a
trust-region style step bounded by -x_i/w_i built from past decreasable
magnitudes). See :mod:`prunadag.steps` for the per-step contracts and
:mod:`prunadag._kernels` for the fused fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import DivergedError, Problem, RunRecord
from .steps import Variant

DEFAULT_VARSIGMA = 0.01   # weight floor constant
DEFAULT_GRAD_TOL = 1e-9
DEFAULT_MAX_ITERS = 10_000


def default_target(n: int) -> int:
    """Default number of relevant parameters: ceil(n/10), floored at 2."""
    return max(2, math.ceil(n / 10))


@dataclass
class PrunAdagState:
    """Mutable optimizer state; single-owner, mutated in place.

    Weights are initialized at sqrt(varsigma) so that the closed forms
    w^2 = varsigma + sum(accumulated squares) hold exactly from the
    first iteration on; the convergence guarantees are stated in terms
    of these closed forms.
    """

    x: np.ndarray
    T: int
    variant: Variant = Variant.V3
    varsigma: float = DEFAULT_VARSIGMA
    k: int = 0
    w_opt: np.ndarray = field(default=None)
    w_dec: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.array(self.x, dtype=np.float64)
        n = self.x.shape[0]
        if not 2 <= self.T <= n:
            raise ValueError(f"T must be in [2, {n}], got {self.T}")
        if not 0.0 < self.varsigma < 1.0:
            raise ValueError(f"varsigma must be in (0, 1), got {self.varsigma}")
        root = np.sqrt(self.varsigma)
        if self.w_opt is None:
            self.w_opt = np.full(n, root)
        if self.w_dec is None:
            self.w_dec = np.full(n, root)

    @property
    def dim(self) -> int:
        return int(self.x.shape[0])


@dataclass
class IterationRecord:
    """Snapshot of one iteration, for traces and invariant replay."""

    grad_norm: float
    grad_norm_opt: float
    card_R: int
    card_A: int
    card_D: int
    max_abs_x: float
    sum_gO2_over_wO: float
    sum_gO2_over_wO2: float
    sum_xD2_over_wD2: float
    g: Optional[np.ndarray] = None
    codes: Optional[np.ndarray] = None
    step: Optional[np.ndarray] = None


def prunadag_iterate(state: PrunAdagState, problem: Problem,
                     keep_history: bool = False,
                     force_numpy: bool = False) -> IterationRecord:
    """Advance ``state`` by one full iteration and return its record."""
    g = problem.gradient(state.x)
    if not np.all(np.isfinite(g)):
        raise DivergedError(f"non-finite gradient at iteration {state.k}")
    x_prev = state.x
    s, w_opt, w_dec, codes, _ = _kernels.iterate(
        x_prev, g, state.w_opt, state.w_dec, state.k, state.T,
        state.variant, force_numpy=force_numpy)

    o_mask = codes != _kernels.CODE_DECREASABLE
    d_mask = ~o_mask
    gO = g[o_mask]
    wO = w_opt[o_mask]
    xD = x_prev[d_mask]
    rec = IterationRecord(
        grad_norm=float(np.linalg.norm(g)),
        grad_norm_opt=float(np.sqrt(np.sum(gO ** 2))),
        card_R=int(np.count_nonzero(codes == _kernels.CODE_RELEVANT)),
        card_A=int(np.count_nonzero(codes == _kernels.CODE_ACCEPTABLE)),
        card_D=int(np.count_nonzero(d_mask)),
        max_abs_x=float(np.max(np.abs(x_prev))),
        sum_gO2_over_wO=float(np.sum(gO ** 2 / wO)),
        sum_gO2_over_wO2=float(np.sum((gO / wO) ** 2)),
        sum_xD2_over_wD2=float(np.sum((xD / w_dec[d_mask]) ** 2)),
    )
    if keep_history:
        rec.g = g
        rec.codes = codes
        rec.step = s.copy()

    state.x = x_prev + s
    state.w_opt = w_opt
    state.w_dec = w_dec
    state.k += 1
    return rec


def run(problem: Problem, x0: np.ndarray, T: Optional[int] = None,
        variant: Variant = Variant.V3, varsigma: float = DEFAULT_VARSIGMA,
        grad_tol: float = DEFAULT_GRAD_TOL, max_iters: int = DEFAULT_MAX_ITERS,
        delta_trace: float = 1e-3, record_objective: bool = True,
        keep_history: bool = False, force_numpy: bool = False) -> RunRecord:
    """Run the optimizer until the gradient norm drops below ``grad_tol``
    or ``max_iters`` iterations have been performed.

    Raises :class:`DivergedError` (with the partial trace attached) if
    an oracle returns a non-finite value.
    """
    if grad_tol <= 0:
        raise ValueError("grad_tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if T is None:
        T = default_target(problem.dim)
    state = PrunAdagState(x=x0, T=T, variant=variant, varsigma=varsigma)
    records: list[IterationRecord] = []
    below: list[int] = []
    objective: list[float] = []
    reason = "max iterations"
    try:
        for _ in range(max_iters):
            below_count = int(np.count_nonzero(np.abs(state.x) < delta_trace))
            if record_objective:
                objective.append(problem.value(state.x))
            rec = prunadag_iterate(state, problem, keep_history=keep_history,
                                   force_numpy=force_numpy)
            records.append(rec)
            below.append(below_count)
            if rec.grad_norm <= grad_tol:
                reason = "gradient tolerance"
                break
    except DivergedError as err:
        err.record = _assemble(records, below, objective, state, "diverged",
                               record_objective, keep_history)
        raise
    trace = _assemble(records, below, objective, state, reason,
                      record_objective, keep_history)
    if record_objective:
        trace.objective_final = problem.value(state.x)
    return trace


def _assemble(records, below, objective, state, reason,
              record_objective, keep_history) -> RunRecord:
    return RunRecord(
        grad_norm=np.array([r.grad_norm for r in records]),
        grad_norm_opt=np.array([r.grad_norm_opt for r in records]),
        below_delta=np.array(below, dtype=np.int64),
        card_R=np.array([r.card_R for r in records], dtype=np.int64),
        card_A=np.array([r.card_A for r in records], dtype=np.int64),
        card_D=np.array([r.card_D for r in records], dtype=np.int64),
        max_abs_x=np.array([r.max_abs_x for r in records]),
        x_final=state.x.copy(),
        reason=reason,
        objective=np.array(objective) if record_objective else None,
        sum_gO2_over_wO=np.array([r.sum_gO2_over_wO for r in records]),
        sum_gO2_over_wO2=np.array([r.sum_gO2_over_wO2 for r in records]),
        sum_xD2_over_wD2=np.array([r.sum_xD2_over_wD2 for r in records]),
        history=records if keep_history else None,
    )
