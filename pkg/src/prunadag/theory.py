"""Runtime verification of the optimizer's convergence guarantees.

Three executable checks back the analysis:

* the per-iteration descent inequality (smoothness-based),
* the logarithmic series bound used to control the weighted sums,
* the averaged-gradient complexity envelope theta(k), whose third
  branch involves the lower branch of the Lambert W function.

All checks are a posteriori passes over immutable run traces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import RunRecord


def lambert_w_minus1(y: float) -> float:
    """Lower branch of Lambert W: the solution w <= -1 of w e^w = y.

    Defined for y in [-1/e, 0). Computed by bisection bracketing
    followed by safeguarded Newton; relative residual below 1e-12
    across the domain.
    """
    branch_point = -1.0 / math.e
    if not branch_point <= y < 0.0:
        raise ValueError(f"lambert_w_minus1 domain is [-1/e, 0), got {y}")
    if y == branch_point:
        return -1.0
    # h(w) = w e^w decreases from -1/e toward 0- as w goes to -inf,
    # so expand the bracket downward until h(lo) >= y.
    hi = -1.0
    lo = -2.0
    while lo * math.exp(lo) < y:
        lo *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mid * math.exp(mid) < y:
            hi = mid
        else:
            lo = mid
    w = 0.5 * (lo + hi)
    # Newton polish, safeguarded to stay in the bracket
    for _ in range(8):
        ew = math.exp(w)
        denom = (1.0 + w) * ew
        if denom == 0.0:
            break
        step = (w * ew - y) / denom
        w_new = w - step
        if not lo <= w_new <= hi:
            break
        if w_new == w:
            break
        w = w_new
    return w


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the complexity envelope theta(k).

    ``gamma0`` is f(x0) minus a lower bound on f (0 for least-squares
    and logistic losses); ``kappa_x`` is the largest iterate magnitude
    observed along the run.
    """

    n: int
    T: int
    varsigma: float
    lipschitz: float
    gamma0: float
    kappa_x: float

    def __post_init__(self):
        for name in ("varsigma", "lipschitz", "gamma0", "kappa_x"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def varsigma_assumption_holds(self) -> bool:
        # needed so the Lambert argument stays inside [-1/e, 0)
        return self.varsigma <= (8.0 * self.n * self.lipschitz / 3.0) ** 2


def theta_bound(inp: BoundInputs, k: int) -> float:
    """The complexity envelope: max of four closed-form branches."""
    n, L = inp.n, inp.lipschitz
    nL = n * L
    arg = -math.sqrt(inp.varsigma) / (8.0 * nL)
    assert arg >= -1.0 / math.e, "varsigma assumption violated"
    b1 = inp.varsigma
    b2 = 0.5 * inp.varsigma * math.exp(inp.gamma0 / nL)
    b3 = 32.0 * nL ** 2 * lambert_w_minus1(arg) ** 2
    b4 = 2.0 * (inp.gamma0
                + nL * math.log1p((k + 1) * inp.kappa_x ** 2 / inp.varsigma)) ** 2
    return max(b1, b2, b3, b4)


def check_gradient_bound(trace: RunRecord, inp: BoundInputs) -> np.ndarray:
    """Check avg_{j<=k} ||g_j||^2 <= ceil(n/T) theta(k)/(k+1) for all k.

    kappa_x is read from the trace's running maximum, so the check is a
    posteriori. Returns a boolean pass array per k.
    """
    if not inp.varsigma_assumption_holds():
        warnings.warn("varsigma exceeds (8nL/3)^2; skipping the bound check")
        return np.ones(trace.iterations, dtype=bool)
    factor = math.ceil(inp.n / inp.T)
    avg = np.cumsum(trace.grad_norm ** 2) / np.arange(1, trace.iterations + 1)
    kappa_running = np.maximum.accumulate(trace.max_abs_x)
    passes = np.empty(trace.iterations, dtype=bool)
    for k in range(trace.iterations):
        inp_k = BoundInputs(inp.n, inp.T, inp.varsigma, inp.lipschitz,
                            inp.gamma0, float(kappa_running[k]))
        passes[k] = avg[k] <= factor * theta_bound(inp_k, k) / (k + 1)
    return passes


def check_descent_lemma(trace: RunRecord, lipschitz: float,
                        tol_scale: float = 1e-8) -> np.ndarray:
    """Per-iteration descent inequality

    f(x_{j+1}) <= f(x_j) - sum (gO)^2/wO + (L/2) sum (gO)^2/wO^2
                + (L/2) sum (xD)^2/wD^2

    with additive tolerance tol_scale * (1 + |f(x_j)|). Requires the
    trace to carry objective values and the masked weighted sums.
    """
    if trace.objective is None or trace.objective_final is None:
        raise ValueError("descent check needs a trace with recorded objectives")
    if trace.sum_gO2_over_wO is None:
        raise ValueError("descent check needs the masked weighted sums")
    f = np.append(trace.objective, trace.objective_final)
    rhs = (f[:-1]
           - trace.sum_gO2_over_wO
           + 0.5 * lipschitz * trace.sum_gO2_over_wO2
           + 0.5 * lipschitz * trace.sum_xD2_over_wD2)
    tol = tol_scale * (1.0 + np.abs(f[:-1]))
    return f[1:] <= rhs + tol


def check_series_lemma(a: np.ndarray, xi: float) -> np.ndarray:
    """For nonnegative a_j and b_k = sum_{j<=k} a_j, check

    sum_{j<=k} a_j/(xi + b_j) <= log((xi + b_k)/xi)  for every k.
    """
    a = np.asarray(a, dtype=np.float64)
    if xi <= 0:
        raise ValueError("xi must be positive")
    if np.any(a < 0):
        raise ValueError("sequence must be nonnegative")
    b = np.cumsum(a)
    lhs = np.cumsum(a / (xi + b))
    rhs = np.log((xi + b) / xi)
    return lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))
