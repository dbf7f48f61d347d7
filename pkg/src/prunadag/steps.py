"""Single-iteration building blocks of the pruning-aware optimizer.

These are the plain-numpy reference implementations. The fused fast
path in :mod:`prunadag._kernels` composes the exact same arithmetic in
one jitted loop; tests cross-check the two against each other.

Index-set conventions used throughout:

* ``R`` -- the T components with the largest gradient magnitudes,
* ``A`` -- non-relevant components whose adaptive step already shrinks
  them (sign match) within the bounds ``[a_i, b_i]``,
* ``O = R | A`` -- updated by the adaptive gradient step,
* ``D`` -- complement of ``O``, updated by a magnitude-shrinking step,
* ``S`` -- the sign-matched subset of ``D`` that receives a nonzero
  shrink step.

``sign(0) = 0`` and never matches a nonzero sign, so components sitting
exactly at zero are never resurrected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import index_set


class Variant(enum.Enum):
    """Bounding-sequence policy for the acceptable-set test.

    V1/V3 rescale the lower bound by ||g||_R / ||x||_S~; V3/V4 cap the
    step with b_i = |x_i| (sign preservation); V1/V2 leave b_i = +inf.
    RELEVANT_ONLY is the ablation that never admits acceptable indices
    (it uses the V3 bounding sequences for its shrink step).
    """

    V1 = "v1"
    V2 = "v2"
    V3 = "v3"
    V4 = "v4"
    RELEVANT_ONLY = "relevant-only"

    @property
    def rescales_lower_bound(self) -> bool:
        return self in (Variant.V1, Variant.V3, Variant.RELEVANT_ONLY)

    @property
    def bounds_step_by_iterate(self) -> bool:
        return self in (Variant.V3, Variant.V4, Variant.RELEVANT_ONLY)


@dataclass(frozen=True)
class Classification:
    """The disjoint index sets produced by one classification pass."""

    R: np.ndarray
    A: np.ndarray
    O: np.ndarray
    D: np.ndarray
    S: np.ndarray

    def validate(self, n: int) -> None:
        for s in (self.R, self.A, self.O, self.D, self.S):
            index_set(s, n)
        if np.intersect1d(self.R, self.A).size:
            raise ValueError("R and A overlap")
        if not np.array_equal(self.O, np.union1d(self.R, self.A)):
            raise ValueError("O != R | A")
        if not np.array_equal(self.D, np.setdiff1d(np.arange(n), self.O)):
            raise ValueError("D is not the complement of O")
        if np.setdiff1d(self.S, self.D).size:
            raise ValueError("S not contained in D")


def relevant_mask(g: np.ndarray, T: int) -> np.ndarray:
    """Boolean mask of the T largest-magnitude components of ``g``.

    Ties are broken toward the lowest index, so the result is
    deterministic across platforms.
    """
    n = g.shape[0]
    if not 1 <= T <= n:
        raise ValueError(f"T must be in [1, {n}], got {T}")
    absg = np.abs(g)
    thr = np.sort(absg)[n - T]
    mask = absg > thr
    short = T - int(np.count_nonzero(mask))
    if short > 0:
        at_thr = np.flatnonzero(~mask & (absg == thr))
        mask[at_thr[:short]] = True
    return mask


def select_relevant(g: np.ndarray, T: int) -> np.ndarray:
    """Indices of the T largest |g_i|, lowest-index tie-break, sorted."""
    return np.flatnonzero(relevant_mask(g, T)).astype(np.int64)


def tentative_opt_weights(w_opt_prev: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Accumulate the squared gradient into every optimisation weight.

    The revert for indices that end up decreasable happens in
    :func:`commit_weights`.
    """
    return np.sqrt(w_opt_prev ** 2 + g ** 2)


def sign_match_mask(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """sign(x_i) == sign(g_i) with both nonzero."""
    return (np.sign(x) == np.sign(g)) & (x != 0.0) & (g != 0.0)


def bounding_sequences(x: np.ndarray, g: np.ndarray, k: int,
                       variant: Variant, r_mask: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper bounds (a, b) for the acceptable-set test.

    Entries at relevant indices are unused and set to 0 / +inf. The
    rescaled variants fall back to the unscaled value when the
    sign-matched iterate norm in the denominator is zero.
    """
    n = x.shape[0]
    a = np.zeros(n)
    b = np.full(n, np.inf)
    comp = ~r_mask
    a[comp] = np.abs(x[comp]) / (k + 1)
    if variant.rescales_lower_bound:
        stilde = comp & sign_match_mask(x, g)
        denom = float(np.sqrt(np.sum(x[stilde] ** 2)))
        if denom > 0.0:
            num = float(np.sqrt(np.sum(g[r_mask] ** 2)))
            a[comp] *= num / denom
    if variant.bounds_step_by_iterate:
        b[comp] = np.abs(x[comp])
    return a, b


def classify(x: np.ndarray, g: np.ndarray, w_tent: np.ndarray,
             a: np.ndarray, b: np.ndarray, T: int,
             variant: Variant) -> Classification:
    """Partition {0..n-1} into relevant/acceptable/decreasable sets."""
    n = x.shape[0]
    r_mask = relevant_mask(g, T)
    if variant is Variant.RELEVANT_ONLY:
        a_mask = np.zeros(n, dtype=bool)
    else:
        ratio = np.abs(g) / w_tent
        a_mask = (~r_mask) & sign_match_mask(x, g) & (a <= ratio) & (ratio <= b)
    o_mask = r_mask | a_mask
    d_mask = ~o_mask
    s_mask = d_mask & sign_match_mask(x, g)
    idx = np.arange(n, dtype=np.int64)
    return Classification(R=idx[r_mask], A=idx[a_mask], O=idx[o_mask],
                          D=idx[d_mask], S=idx[s_mask])


def optimisable_step(g: np.ndarray, w_opt: np.ndarray,
                     O: np.ndarray) -> np.ndarray:
    """Adaptive gradient step -g_i/w_i on the optimisable indices, 0 elsewhere."""
    s = np.zeros_like(g)
    s[O] = -g[O] / w_opt[O]
    return s


def decreasable_step(x: np.ndarray, g: np.ndarray, w_dec: np.ndarray,
                     cls: Classification, a: np.ndarray) -> np.ndarray:
    """Magnitude-shrinking step on the decreasable indices.

    ``w_dec`` must already hold the updated weights for indices in D.
    The construction guarantees |s_i| <= |x_i/w_i| on D and
    sum_{i in D} g_i s_i <= 0; both are asserted because a failure
    signals an implementation bug, not bad data.
    """
    s = np.zeros_like(x)
    s_limit = -x[cls.S] / w_dec[cls.S]
    s[cls.S] = -np.sign(x[cls.S]) * np.minimum(a[cls.S], np.abs(s_limit))
    assert np.all(np.abs(s[cls.D]) <= np.abs(x[cls.D] / w_dec[cls.D]))
    assert float(np.dot(g[cls.D], s[cls.D])) <= 0.0
    return s


def commit_weights(w_opt_prev: np.ndarray, w_dec_prev: np.ndarray,
                   w_tent: np.ndarray, x: np.ndarray,
                   cls: Classification) -> tuple[np.ndarray, np.ndarray]:
    """Keep the tentative weight on O, revert it on D; accumulate x^2 on D.

    After this the closed forms hold: w_opt^2 = varsigma + sum of g_i^2
    over past iterations with i optimisable, and w_dec^2 = varsigma +
    sum of x_i^2 over past iterations with i decreasable.
    """
    w_opt = w_opt_prev.copy()
    w_opt[cls.O] = w_tent[cls.O]
    w_dec = w_dec_prev.copy()
    w_dec[cls.D] = np.sqrt(w_dec_prev[cls.D] ** 2 + x[cls.D] ** 2)
    return w_opt, w_dec
