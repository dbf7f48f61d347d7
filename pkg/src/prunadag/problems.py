"""Test-problem generators and dataset loaders.

Covers three families:

* randomly generated under-determined least-squares (six matrix
  ensembles A1..A6),
* binary classification with the averaged logistic loss (LIBSVM text
  loader plus a synthetic separable generator),
* the sparse-coding least-squares objective with a dictionary loaded
  from file, and a synthetic DCT-dictionary recovery analog.

All randomness flows through numpy's seedable PCG64 generator with
normal variates produced by Box-Muller, so a (kind, dims, seed) tuple
reproduces bit-identically within this implementation and at the
distribution level elsewhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Problem

MATRIX_MAGIC = b"PADM"


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Box-Muller normal variates from a seeded uniform stream."""
    m = int(np.prod(size)) if not np.isscalar(size) else int(size)
    half = (m + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], no log(0)
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2),
                        r * np.sin(2.0 * np.pi * u2)])[:m]
    return z.reshape(size)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix: entry (k, j) = c_k cos(pi (2j+1) k / 2n)."""
    j = np.arange(n)
    k = np.arange(n)[:, None]
    M = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    M[0] *= np.sqrt(1.0 / n)
    M[1:] *= np.sqrt(2.0 / n)
    return M


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

LS_KINDS = ("A1", "A2", "A3", "A4", "A5", "A6")


@dataclass
class LeastSquaresProblem:
    """f(x) = 0.5 ||Ax - b||^2 with cached Lipschitz constant of g."""

    A: np.ndarray
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    lipschitz: float = field(init=False)

    def __post_init__(self):
        self.lipschitz = float(np.linalg.norm(self.A, 2) ** 2)

    def problem(self) -> Problem:
        A, b = self.A, self.b
        return Problem(
            dim=A.shape[1],
            grad=lambda x: A.T @ (A @ x - b),
            objective=lambda x: 0.5 * float(np.sum((A @ x - b) ** 2)),
            lipschitz=self.lipschitz,
        )


def gen_least_squares(kind: str, m: int, n: int, seed: int) -> LeastSquaresProblem:
    """Generate one of the six random least-squares ensembles.

    The problem is under-determined (m < n); the right-hand side is
    noiseless, b = A x* with x* standard normal, so f(x*) = 0 and
    g(x*) = 0 by construction.

    A2/A4 are matrices with orthonormal rows obtained from the QR
    factorization of an n-by-m Gaussian draw; A3 is a Gaussian matrix
    whose m-dimensional left factor is orthogonalized (A = Q G with Q
    m-by-m orthogonal). These are well-defined stand-ins for "random
    orthogonal" constructions that cannot hold literally when m < n.
    """
    if m >= n:
        raise ValueError(f"problem must be under-determined: m={m} >= n={n}")
    if kind not in LS_KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}, expected one of {LS_KINDS}")
    rng = np.random.default_rng(seed)
    if kind == "A1":
        A = standard_normal(rng, (m, n))
    elif kind in ("A2", "A4"):
        Q, _ = np.linalg.qr(standard_normal(rng, (n, m)))
        A = Q.T.copy()
    elif kind == "A3":
        Q, _ = np.linalg.qr(standard_normal(rng, (m, m)))
        A = Q @ standard_normal(rng, (m, n))
    elif kind == "A5":
        A = (rng.random((m, n)) < 0.5).astype(np.float64)
    else:  # A6: m rows of the n-by-n DCT-II matrix, sampled by seed
        rows = np.sort(rng.permutation(n)[:m])
        A = dct_matrix(n)[rows]
    x_star = standard_normal(rng, n)
    return LeastSquaresProblem(A=A, b=A @ x_star, x_star=x_star)


def gen_dct_sparse_recovery(m: int, n: int, seed: int, nnz: int,
                            noise: float = 0.0) -> LeastSquaresProblem:
    """Synthetic sparse-recovery analog: DCT sensing rows, sparse signal.

    b = A x* (+ optional Gaussian noise); x* has exactly ``nnz``
    nonzero entries at seeded positions.
    """
    if m >= n:
        raise ValueError("sparse recovery problem must be under-determined")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.permutation(n)[:m])
    A = dct_matrix(n)[rows]
    x_star = np.zeros(n)
    support = rng.permutation(n)[:nnz]
    x_star[support] = standard_normal(rng, nnz)
    b = A @ x_star
    if noise > 0.0:
        b = b + noise * standard_normal(rng, m)
    return LeastSquaresProblem(A=A, b=b, x_star=x_star)


# ---------------------------------------------------------------------------
# Sparse coding
# ---------------------------------------------------------------------------

@dataclass
class SparseCodingProblem:
    """f(x) = ||y - Dx||^2, the unconstrained sparse-coding relaxation."""

    D: np.ndarray
    y: np.ndarray
    lipschitz: float = field(init=False)

    def __post_init__(self):
        self.lipschitz = float(2.0 * np.linalg.norm(self.D, 2) ** 2)

    def problem(self) -> Problem:
        D, y = self.D, self.y
        return Problem(
            dim=D.shape[1],
            grad=lambda x: 2.0 * D.T @ (D @ x - y),
            objective=lambda x: float(np.sum((y - D @ x) ** 2)),
            lipschitz=self.lipschitz,
        )


# ---------------------------------------------------------------------------
# Logistic binary classification
# ---------------------------------------------------------------------------

@dataclass
class LogisticProblem:
    """Averaged logistic loss over (sample, label in {-1,+1}) pairs."""

    samples: np.ndarray   # N x n
    labels: np.ndarray    # entries in {-1, +1}

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if set(np.unique(self.labels)) - {-1.0, 1.0}:
            raise ValueError("labels must be in {-1, +1}")
        if self.samples.shape[0] != self.labels.shape[0]:
            raise ValueError("sample/label count mismatch")

    @property
    def N(self) -> int:
        return int(self.samples.shape[0])

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    def margins(self, x: np.ndarray) -> np.ndarray:
        return self.labels * (self.samples @ x)

    def value(self, x: np.ndarray) -> float:
        t = self.margins(x)
        # log(1 + exp(-t)) without overflow for any |t|
        loss = np.where(t >= 0, np.log1p(np.exp(-np.abs(t))),
                        -t + np.log1p(np.exp(-np.abs(t))))
        return float(np.mean(loss))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        t = self.margins(x)
        # sigma(-t) = 1 / (1 + exp(t)), computed stably on both tails
        e = np.exp(-np.abs(t))
        sig = np.where(t >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        return -(self.samples.T @ (sig * self.labels)) / self.N

    def problem(self) -> Problem:
        # Hessian is bounded by (1/4N) A^T A, a valid if loose constant.
        L = float(np.linalg.norm(self.samples, 2) ** 2 / (4.0 * self.N))
        return Problem(dim=self.dim, grad=self.gradient,
                       objective=self.value, lipschitz=L)


def classify_accuracy(x: np.ndarray, problem: LogisticProblem) -> float:
    """Fraction of samples whose sign(a_i . x) matches the label.

    Ties (zero inner product) predict +1.
    """
    scores = problem.samples @ x
    preds = np.where(scores >= 0, 1.0, -1.0)
    return float(np.mean(preds == problem.labels))


def gen_separable_classification(n_features: int, n_informative: int,
                                 N: int, seed: int,
                                 train_fraction: float = 0.7,
                                 informative_scale: float = 50.0
                                 ) -> tuple[LogisticProblem, LogisticProblem]:
    """Linearly separable synthetic dataset split into train/test.

    Only ``n_informative`` seeded feature positions carry signal; the
    rest are pure noise. Labels are the sign of the inner product with
    the hidden coefficient vector. The informative columns are scaled
    up so the logistic margin saturates while the corresponding
    coefficients are still small in magnitude; dense adaptive methods
    then park predictive mass below the noise floor, which is exactly
    the regime where naive magnitude pruning is destructive.
    """
    rng = np.random.default_rng(seed)
    w = np.zeros(n_features)
    support = rng.permutation(n_features)[:n_informative]
    w[support] = standard_normal(rng, n_informative)
    A = standard_normal(rng, (N, n_features))
    A[:, support] *= informative_scale
    scores = A @ w
    labels = np.where(scores >= 0, 1.0, -1.0)
    n_train = int(round(train_fraction * N))
    perm = rng.permutation(N)
    tr, te = perm[:n_train], perm[n_train:]
    return (LogisticProblem(A[tr], labels[tr]),
            LogisticProblem(A[te], labels[te]))


class LibsvmParseError(ValueError):
    pass


def _parse_libsvm(path) -> tuple[np.ndarray, np.ndarray]:
    labels, rows, max_idx = [], [], 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                feats = {}
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError("indices are 1-based")
                    feats[idx] = float(val_s)
            except (ValueError, IndexError) as err:
                raise LibsvmParseError(f"{path}:{lineno}: malformed line ({err})")
            labels.append(label)
            rows.append(feats)
            if feats:
                max_idx = max(max_idx, max(feats))
    if not labels:
        raise LibsvmParseError(f"{path}: empty file")
    X = np.zeros((len(labels), max_idx))
    for i, feats in enumerate(rows):
        for idx, val in feats.items():
            X[i, idx - 1] = val
    y = np.asarray(labels)
    # map {0,1} conventions onto {-1,+1}; pass +-1 through unchanged
    y = np.where(y > 0, 1.0, -1.0)
    return X, y


def load_libsvm(path, normalize: bool = True,
                split_seed: Optional[int] = None,
                train_fraction: float = 0.7
                ) -> tuple[LogisticProblem, Optional[LogisticProblem]]:
    """Load a LIBSVM sparse text file into train/test logistic problems.

    Features are min-max normalized to [0, 1] using training-set
    statistics; test features are clipped back into [0, 1] afterward.
    With ``split_seed=None`` no split is performed and test is None.
    """
    X, y = _parse_libsvm(path)
    N = X.shape[0]
    if split_seed is not None:
        rng = np.random.default_rng(split_seed)
        perm = rng.permutation(N)
        n_train = int(round(train_fraction * N))
        tr, te = perm[:n_train], perm[n_train:]
    else:
        tr, te = np.arange(N), np.array([], dtype=np.int64)
    X_tr, X_te = X[tr], X[te]
    if normalize:
        lo = X_tr.min(axis=0)
        hi = X_tr.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        X_tr = (X_tr - lo) / span
        X_te = np.clip((X_te - lo) / span, 0.0, 1.0)
    train = LogisticProblem(X_tr, y[tr])
    test = LogisticProblem(X_te, y[te]) if te.size else None
    return train, test


# ---------------------------------------------------------------------------
# Dense matrix file format
# ---------------------------------------------------------------------------

def save_matrix(path, M: np.ndarray) -> None:
    """Write the dense binary format: 'PADM', u32 rows, u32 cols (LE),
    then row-major float64 payload."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", M.shape[0], M.shape[1]))
        fh.write(np.ascontiguousarray(M).tobytes())


def load_matrix(path) -> np.ndarray:
    """Read the dense binary format, falling back to CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == MATRIX_MAGIC:
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            if data.size != rows * cols:
                raise ValueError(f"{path}: truncated matrix payload")
            return data.reshape(rows, cols).copy()
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def load_solution(path) -> np.ndarray:
    """Load a single-column solution vector from either matrix format."""
    M = load_matrix(path)
    if 1 not in M.shape and M.ndim == 2 and min(M.shape) != 1:
        raise ValueError(f"{path}: expected a single-column solution, got {M.shape}")
    return M.reshape(-1)
