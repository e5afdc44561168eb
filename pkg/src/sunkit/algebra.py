"""Closure of the SUN family under latent permutation, affine maps,
marginalization and conditioning, plus the Gaussian selection density."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import SunParams, _points, log_orthant
from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient
from .gauss import DEFAULT_QMC, QmcConfig, mvn_pdf_log
from .numlin import Permutation, as_matrix, as_vector, cholesky, sym


@dataclass(frozen=True)
class PartitionSpec:
    """Split of ``d`` coordinates into a leading block of ``d1`` and the rest."""

    d1: int
    d2: int

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 0:
            raise DimensionMismatch(f"invalid partition ({self.d1}, {self.d2})")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    def block(self, i: int) -> np.ndarray:
        if i == 1:
            return np.arange(self.d1)
        if i == 2:
            return np.arange(self.d1, self.d)
        raise ValueError("block must be 1 or 2")

    def check(self, p: SunParams) -> None:
        if self.d != p.d:
            raise DimensionMismatch(f"partition covers {self.d} coordinates, params have d={p.d}")


@dataclass(frozen=True)
class OrthantRegion:
    """The selection set ``(lower_1, inf) x ... x (lower_m, inf)``."""

    lower: np.ndarray

    def __post_init__(self):
        low = as_vector(self.lower, what="lower")
        if not np.all(np.isfinite(low)):
            raise ValueError("orthant bounds must be finite")
        object.__setattr__(self, "lower", low)

    @classmethod
    def from_tau(cls, tau) -> "OrthantRegion":
        return cls(-as_vector(tau, what="tau"))

    @property
    def order(self) -> int:
        return self.lower.shape[0]


def permute_latent(p: SunParams, P: Permutation) -> SunParams:
    """Relabel the latent coordinates: ``(xi, Omega, Delta P^T, P tau, P GammaBar P^T)``."""
    if P.order != p.m:
        raise DimensionMismatch(f"permutation of order {P.order} for m={p.m}")
    idx = list(P.map)
    return SunParams(p.xi, p.Omega, p.Delta[:, idx], p.tau[idx], p.GammaBar[np.ix_(idx, idx)])


def affine_transform(p: SunParams, a, A) -> SunParams:
    """Law of ``a + A^T Y`` for a full column rank ``d x q`` matrix ``A`` (``q <= d``)."""
    A = as_matrix(A, what="A")
    if A.shape[0] != p.d:
        raise DimensionMismatch(f"A has {A.shape[0]} rows, expected d={p.d}")
    q = A.shape[1]
    if q > p.d:
        raise RankDeficient(f"A has {q} columns, more than d={p.d}")
    a = as_vector(a, q, "a")
    Omega_A = sym(A.T @ p.Omega @ A)
    try:
        cholesky(Omega_A, "A^T Omega A")
    except NotPositiveDefinite:
        raise RankDeficient("A does not have full column rank") from None
    Delta_A = (A.T @ (p.omega[:, None] * p.Delta)) / np.sqrt(np.diag(Omega_A))[:, None]
    return SunParams(a + A.T @ p.xi, Omega_A, Delta_A, p.tau, p.GammaBar)


def marginal(p: SunParams, part: PartitionSpec, block: int = 1) -> SunParams:
    part.check(p)
    idx = part.block(block)
    if idx.size == 0:
        raise DimensionMismatch("empty block")
    return SunParams(p.xi[idx], p.Omega[np.ix_(idx, idx)], p.Delta[idx], p.tau, p.GammaBar)


@dataclass(frozen=True)
class ConditionalParts:
    """Conditional parameters before renormalization.

    ``Delta`` is the covariance between the conditioned standardized block
    and the latent vector, ``Gamma`` the conditional latent covariance; in
    general neither is on the correlation scale.
    """

    xi: np.ndarray
    Omega: np.ndarray
    Delta: np.ndarray
    tau: np.ndarray
    Gamma: np.ndarray
    OmegaBar: np.ndarray


def conditional_parts(p: SunParams, part: PartitionSpec, y1) -> ConditionalParts:
    part.check(p)
    if part.d2 < 1:
        raise DimensionMismatch("nothing left to condition on")
    i1, i2 = part.block(1), part.block(2)
    y1 = as_vector(y1, part.d1, "y1")
    Ob = p.OmegaBar
    Ob11, Ob21, Ob22 = Ob[np.ix_(i1, i1)], Ob[np.ix_(i2, i1)], Ob[np.ix_(i2, i2)]
    O11, O21, O22 = (p.Omega[np.ix_(i1, i1)], p.Omega[np.ix_(i2, i1)], p.Omega[np.ix_(i2, i2)])
    D1, D2 = p.Delta[i1], p.Delta[i2]
    z1 = (y1 - p.xi[i1]) / p.omega[i1]

    reg = np.linalg.solve(O11, O21.T).T  # Omega_21 Omega_11^{-1}
    regbar = np.linalg.solve(Ob11, Ob21.T).T
    B1 = np.linalg.solve(Ob11, D1)  # OmegaBar_11^{-1} Delta_1
    return ConditionalParts(
        xi=p.xi[i2] + reg @ (y1 - p.xi[i1]),
        Omega=sym(O22 - reg @ O21.T),
        Delta=D2 - regbar @ D1,
        tau=p.tau + z1 @ B1,
        Gamma=sym(p.GammaBar - D1.T @ B1),
        OmegaBar=sym(Ob22 - regbar @ Ob21.T),
    )


def conditional(p: SunParams, part: PartitionSpec, y1) -> SunParams:
    """Law of the second block given the first block equals ``y1``.

    The raw conditional parameters are brought back to the correlation
    scale: with ``s = sqrt(diag(Gamma))`` and ``s2`` the conditional
    standard deviations of the standardized second block,
    ``GammaBar' = s^{-1} Gamma s^{-1}``, ``tau' = s^{-1} tau`` and
    ``Delta' = s2^{-1} Delta s^{-1}``.
    """
    c = conditional_parts(p, part, y1)
    s = np.sqrt(np.diag(c.Gamma))
    s2 = np.sqrt(np.diag(c.OmegaBar))
    Gbar = c.Gamma / np.outer(s, s)
    np.fill_diagonal(Gbar, 1.0)
    return SunParams(c.xi, c.Omega, c.Delta / np.outer(s2, s), c.tau / s, Gbar)


def selection_logpdf(p: SunParams, z, B: OrthantRegion, cfg: QmcConfig = DEFAULT_QMC):
    """Log selection density of ``U1 | U0 in B`` on the standardized scale.

    Only ``Delta``, ``OmegaBar`` and ``GammaBar`` of ``p`` enter; its
    location, scale and ``tau`` are ignored in favour of ``B``.
    """
    if B.order != p.m:
        raise DimensionMismatch(f"orthant of order {B.order} for m={p.m}")
    Z, single = _points(z, p.d)
    base = np.atleast_1d(mvn_pdf_log(Z, np.zeros(p.d), p.OmegaBar))
    if not np.any(p.Delta):
        err = np.zeros_like(base)
    else:
        cond_mean = Z @ np.linalg.solve(p.OmegaBar, p.Delta)
        num, num_err = log_orthant(cond_mean - B.lower, p.cond_cov, cfg)
        den, den_err = log_orthant(-B.lower, p.GammaBar, cfg)
        base = base + num - den
        err = num_err + den_err
    if single:
        return float(base[0]), float(err[0])
    return base, err


@dataclass(frozen=True)
class CommutationReport:
    """Largest entrywise discrepancy of each permutation identity."""

    affine: float
    marginal: float
    conditional: float

    @property
    def worst(self) -> float:
        return max(self.affine, self.marginal, self.conditional)


def _gap(*pairs) -> float:
    return max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0)) for a, b in pairs)


def permutation_commutes_report(
    p: SunParams,
    P: Permutation,
    part: PartitionSpec,
    y1,
    A: Optional[np.ndarray] = None,
) -> CommutationReport:
    """Check that permuting the latent block commutes with affine maps,
    marginalization and conditioning.

    ``A`` defaults to the lower-triangular matrix of ones (full rank).
    """
    if P.order != p.m:
        raise DimensionMismatch(f"permutation of order {P.order} for m={p.m}")
    part.check(p)
    idx = list(P.map)
    pp = permute_latent(p, P)
    if A is None:
        A = np.tril(np.ones((p.d, p.d)))
    a = np.zeros(np.shape(A)[1])

    fa, fpa = affine_transform(p, a, A), affine_transform(pp, a, A)
    affine_gap = _gap((fpa.Delta, fa.Delta[:, idx]), (fpa.xi, fa.xi), (fpa.Omega, fa.Omega),
                      (fpa.tau, fa.tau[idx]), (fpa.GammaBar, fa.GammaBar[np.ix_(idx, idx)]))

    marg_gap = 0.0
    for blk in (1, 2) if part.d2 else (1,):
        mp = marginal(pp, part, blk)
        pm = permute_latent(marginal(p, part, blk), P)
        marg_gap = max(marg_gap, max(float(np.max(np.abs(a_ - b_))) for a_, b_ in zip(mp.fields(), pm.fields())))

    cond_gap = 0.0
    if part.d2:
        c, cp = conditional_parts(p, part, y1), conditional_parts(pp, part, y1)
        cond_gap = _gap((cp.Delta, c.Delta[:, idx]), (cp.tau, c.tau[idx]),
                        (cp.Gamma, c.Gamma[np.ix_(idx, idx)]), (cp.xi, c.xi), (cp.Omega, c.Omega))
    return CommutationReport(affine_gap, marg_gap, cond_gap)
