"""Small dense linear algebra and the permutation / monomial matrix algebra.

Symmetric matrices are plain ``float64`` arrays; :func:`sym` is the one
place that enforces exact symmetry (the lower triangle wins).

Permutations use the row convention ``P[i, map[i]] = 1`` so that
``(P @ v)[i] == v[map[i]]``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotMonomial,
    NotPositiveDefinite,
    Singular,
)

PD_TOLERANCE = 1e-12
MONOMIAL_ZERO = 1e-14
JACOBI_MAX_SWEEPS = 100


def sym(M) -> np.ndarray:
    """Return a symmetric copy of ``M`` built from its lower triangle."""
    M = np.array(M, dtype=float, ndmin=2)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    lower = np.tri(M.shape[0], dtype=bool)
    return np.where(lower, M, M.T)


def cholesky(M, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    A pivot ``L[i, i]**2`` at or below ``1e-12 * max(diag(M))`` counts as
    a failure, so the test is insensitive to the overall scale of ``M``.
    """
    M = sym(M)
    scale = float(np.max(np.abs(np.diag(M)))) if M.size else 0.0
    if not np.all(np.isfinite(M)) or scale <= 0.0:
        raise NotPositiveDefinite(f"{what} is not positive definite", block=what)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{what} is not positive definite", block=what) from None
    pivots = np.diag(L) ** 2
    if np.min(pivots) <= PD_TOLERANCE * scale:
        raise NotPositiveDefinite(
            f"{what} is not positive definite (smallest pivot {np.min(pivots):.3e})",
            block=what,
        )
    return L


def is_positive_definite(M) -> bool:
    try:
        cholesky(M)
    except NotPositiveDefinite:
        return False
    return True


def eigen_sym(M, max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values sorted in descending order and
    ``vectors[:, k]`` the eigenvector for ``values[k]``. Ties come back in
    whatever order the sweep leaves them.
    """
    A = sym(M)
    n = A.shape[0]
    V = np.eye(n)
    total = np.sum(A * A)
    if total == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sum(np.tril(A, -1) ** 2)
        if off <= 1e-30 * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                # A <- J^T A J with the rotation acting on rows/cols p, q
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        if np.sum(np.tril(A, -1) ** 2) > 1e-24 * total:
            raise ConvergenceFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], V[:, order]


@dataclass(frozen=True)
class Permutation:
    """A permutation of ``{0, ..., m-1}`` stored as an index map."""

    map: Tuple[int, ...]

    def __post_init__(self):
        mp = tuple(int(i) for i in self.map)
        if len(mp) == 0 or sorted(mp) != list(range(len(mp))):
            raise ValueError(f"not a permutation of 0..{len(mp) - 1}: {self.map!r}")
        object.__setattr__(self, "map", mp)

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(tuple(range(m)))

    @classmethod
    def from_matrix(cls, P) -> "Permutation":
        P = np.asarray(P)
        return cls(tuple(int(j) for j in np.argmax(P, axis=1)))

    @classmethod
    def all(cls, m: int) -> Iterator["Permutation"]:
        """Every permutation of order ``m`` in lexicographic order."""
        for mp in itertools.permutations(range(m)):
            yield cls(mp)

    @property
    def order(self) -> int:
        return len(self.map)

    @property
    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.map))

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.order, self.order))
        P[np.arange(self.order), self.map] = 1.0
        return P

    def inverse(self) -> "Permutation":
        inv = [0] * self.order
        for i, j in enumerate(self.map):
            inv[j] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """Matrix product ``self.matrix() @ other.matrix()``."""
        if other.order != self.order:
            raise DimensionMismatch("permutations of different order")
        return Permutation(tuple(other.map[j] for j in self.map))

    def __matmul__(self, other: "Permutation") -> "Permutation":
        return self.compose(other)

    def __len__(self) -> int:
        return self.order


def apply_perm_vec(p: Permutation, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != p.order:
        raise DimensionMismatch(f"vector of length {v.shape[0]} for permutation of order {p.order}")
    return v[list(p.map)]


def conjugate_by_perm(p: Permutation, M) -> np.ndarray:
    """``P M P^T``, i.e. ``result[i, j] = M[map[i], map[j]]``."""
    M = np.asarray(M, dtype=float)
    if M.shape != (p.order, p.order):
        raise DimensionMismatch(f"matrix of shape {M.shape} for permutation of order {p.order}")
    idx = list(p.map)
    return M[np.ix_(idx, idx)]


@dataclass(frozen=True)
class MonomialDecomposition:
    """``A = diag(diag) @ perm.matrix()`` with every ``diag`` entry positive."""

    diag: np.ndarray
    perm: Permutation

    def matrix(self) -> np.ndarray:
        return self.diag[:, None] * self.perm.matrix()


def _zero_threshold(A: np.ndarray) -> float:
    return MONOMIAL_ZERO * float(np.max(np.abs(A))) if A.size else 0.0


def monomial_factorize(A) -> MonomialDecomposition:
    """Factor ``A`` as a positive diagonal matrix times a permutation matrix.

    Entries with magnitude at most ``1e-14 * max|A|`` are treated as zero.
    Raises :class:`NotMonomial` when some row does not hold exactly one
    positive entry, and :class:`Singular` for zero rows or repeated columns.
    """
    A = np.array(A, dtype=float, ndmin=2)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    eps = _zero_threshold(A)
    cols = []
    for i, row in enumerate(A):
        nonzero = np.abs(row) > eps
        if not nonzero.any():
            raise Singular(f"row {i} is zero")
        if np.any(row[nonzero] < 0):
            raise NotMonomial(f"row {i} has a negative entry")
        if np.count_nonzero(nonzero) != 1:
            raise NotMonomial(f"row {i} has {np.count_nonzero(nonzero)} positive entries")
        cols.append(int(np.flatnonzero(nonzero)[0]))
    if len(set(cols)) != len(cols):
        raise Singular("positive entries share a column")
    diag = A[np.arange(A.shape[0]), cols].copy()
    return MonomialDecomposition(diag=diag, perm=Permutation(tuple(cols)))


@dataclass(frozen=True)
class OrderReport:
    """Outcome of :func:`orthant_order_preserved`.

    On failure ``witness`` holds ``(x, y)`` and ``direction`` tells which
    implication broke: ``"forward"`` means ``x <= y`` but not ``Ax <= Ay``;
    ``"reverse"`` means ``Ax <= Ay`` but not ``x <= y``.
    """

    passed: bool
    witness: Optional[Tuple[np.ndarray, np.ndarray]] = None
    direction: Optional[str] = None
    trials: int = 0

    def __bool__(self) -> bool:
        return self.passed


def _construct_witness(A: np.ndarray, eps: float):
    # a row with negative entries J: x = 0, y = 1_J gives (Ay)_i < 0 = (Ax)_i
    for i, row in enumerate(A):
        neg = row < -eps
        if neg.any():
            return np.zeros(A.shape[1]), neg.astype(float)
    return None


def orthant_order_preserved(A, trials: int = 200, seed: int = 0) -> OrderReport:
    """Check whether ``x <= y  <=>  Ax <= Ay`` for the nonsingular matrix ``A``.

    The deterministic sign-pattern construction is tried first on ``A``
    (forward direction) and on ``A^{-1}`` (reverse direction), then
    ``trials`` random ordered pairs are probed in each direction.
    """
    A = np.array(A, dtype=float, ndmin=2)
    m = A.shape[0]
    if A.shape != (m, m):
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if np.linalg.matrix_rank(A) < m:
        raise Singular("matrix is singular")
    Ainv = np.linalg.inv(A)

    w = _construct_witness(A, _zero_threshold(A))
    if w is not None:
        return OrderReport(False, w, "forward", 0)
    w = _construct_witness(Ainv, _zero_threshold(Ainv))
    if w is not None:
        xa, ya = w
        return OrderReport(False, (Ainv @ xa, Ainv @ ya), "reverse", 0)

    rng = np.random.default_rng(seed)
    for t in range(trials):
        x = rng.standard_normal(m)
        gap = np.abs(rng.standard_normal(m)) * (rng.random(m) < 0.7)
        y = x + gap
        if np.any(A @ x > A @ y + 1e-12 * (np.abs(A) @ (np.abs(x) + np.abs(y)))):
            return OrderReport(False, (x, y), "forward", t + 1)
        xa = rng.standard_normal(m)
        ya = xa + np.abs(rng.standard_normal(m)) * (rng.random(m) < 0.7)
        x, y = np.linalg.solve(A, xa), np.linalg.solve(A, ya)
        if np.any(x > y + 1e-10 * (np.abs(x) + np.abs(y) + 1.0)):
            return OrderReport(False, (x, y), "reverse", t + 1)
    return OrderReport(True, None, None, trials)


def random_permutation(m: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(int(i) for i in rng.permutation(m)))


def as_vector(v, n: Optional[int] = None, what: str = "vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"{what} must be one-dimensional")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {v.shape[0]}, expected {n}")
    return v


def as_matrix(M, shape: Optional[Sequence[int]] = None, what: str = "matrix") -> np.ndarray:
    M = np.array(M, dtype=float, ndmin=2)
    if M.ndim != 2:
        raise DimensionMismatch(f"{what} must be two-dimensional")
    if shape is not None and M.shape != tuple(shape):
        raise DimensionMismatch(f"{what} has shape {M.shape}, expected {tuple(shape)}")
    return M
