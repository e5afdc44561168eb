"""Canonical representatives of the latent permutation classes, equivalence
testing, and constructors for sub-models that remove the permutation
ambiguity by construction."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import special

from .algebra import permute_latent
from .core import SunParams, _lift, _points
from .errors import (
    DimensionMismatch,
    NonPositiveScale,
    NotDiagonal,
    NotOrdered,
    TooLarge,
    ZeroBeta,
)
from .gauss import mvn_pdf_log
from .numlin import Permutation, as_matrix, as_vector, cholesky, eigen_sym, sym

TIE_TOLERANCE = 1e-9
EQUIV_TOLERANCE = 1e-10
DIAGONAL_TOLERANCE = 1e-10
EXHAUSTIVE_MAX_ORDER = 8


class Strategy(enum.Enum):
    TAU_ASCENDING = "tau"
    EIGEN_DESCENDING = "eigen"


@dataclass(frozen=True)
class CanonicalForm:
    """Result of a canonicalization.

    ``params == permute_latent(input, applied)``. ``degenerate`` means the
    ordering could not be made unique; ``tau_strict`` records whether ``tau``
    alone was strictly ordered (when it is not, the ordering relied on the
    tie-breaking keys).
    """

    params: SunParams
    applied: Permutation
    strategy: Strategy
    degenerate: bool
    tau_strict: bool = True


def _cmp_seq(a, b, tol: float = TIE_TOLERANCE) -> int:
    for x, y in zip(a, b):
        if abs(x - y) > tol:
            return -1 if x < y else 1
    return 0


def _fallback_keys(p: SunParams) -> List[Tuple[np.ndarray, ...]]:
    # per latent coordinate: tau, its Delta column, its GammaBar row as a multiset
    return [
        (p.tau[i:i + 1], p.Delta[:, i], np.sort(p.GammaBar[i]))
        for i in range(p.m)
    ]


def _cmp_keys(a, b) -> int:
    for x, y in zip(a, b):
        c = _cmp_seq(x, y)
        if c:
            return c
    return 0


def _sort_latents(keys) -> Tuple[Permutation, bool]:
    order = sorted(range(len(keys)), key=cmp_to_key(lambda i, j: _cmp_keys(keys[i], keys[j])))
    tied = any(_cmp_keys(keys[i], keys[j]) == 0 for i, j in zip(order, order[1:]))
    return Permutation(tuple(order)), tied


def _tau_strict(tau: np.ndarray) -> bool:
    s = np.sort(tau)
    return bool(np.all(np.diff(s) > TIE_TOLERANCE))


def canonicalize_tau(p: SunParams) -> CanonicalForm:
    """Order the latent coordinates by ascending ``tau``.

    Ties in ``tau`` are broken by the columns of ``Delta`` and then by the
    rows of ``GammaBar`` (compared as sorted multisets so that the key does
    not depend on the current labelling). Remaining ties mark the form as
    degenerate.
    """
    P, tied = _sort_latents(_fallback_keys(p))
    return CanonicalForm(permute_latent(p, P), P, Strategy.TAU_ASCENDING, tied, _tau_strict(p.tau))


def _fix_sign(v: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Choose the sign of an eigenvector without reference to coordinate order.

    Returns the vector and whether the choice was possible; if not, only
    ``|v|`` is meaningful.
    """
    s = float(np.sum(v))
    if abs(s) > TIE_TOLERANCE:
        return (v if s > 0 else -v), True
    c = _cmp_seq(np.sort(v), np.sort(-v))
    if c:
        return (v if c > 0 else -v), True
    return np.abs(v), False


def canonicalize_eigen(p: SunParams) -> CanonicalForm:
    """Order the latent coordinates by their loadings on the eigenvectors of ``GammaBar``.

    Eigenvectors are taken in descending eigenvalue order with a
    labelling-independent sign convention; each latent coordinate is keyed
    by its row of loadings and the coordinates are sorted in descending
    lexicographic order, with ``tau``, ``Delta`` and ``GammaBar`` as
    tie-breakers. Repeated eigenvalues make the eigenbasis arbitrary, so the
    form is then flagged degenerate.
    """
    m = p.m
    if m == 1:
        return CanonicalForm(p, Permutation.identity(1), Strategy.EIGEN_DESCENDING, False,
                             _tau_strict(p.tau))
    vals, vecs = eigen_sym(p.GammaBar)
    spread = bool(np.all(-np.diff(vals) > TIE_TOLERANCE))
    fallback = _fallback_keys(p)
    if spread:
        V = np.column_stack([_fix_sign(vecs[:, k])[0] for k in range(m)])
        keys = [(-V[i],) + fallback[i] for i in range(m)]
    else:
        keys = fallback
    P, tied = _sort_latents(keys)
    return CanonicalForm(permute_latent(p, P), P, Strategy.EIGEN_DESCENDING,
                         (not spread) or tied, _tau_strict(p.tau))


def _latent_gap(p: SunParams, q: SunParams, idx) -> float:
    idx = list(idx)
    return max(
        float(np.max(np.abs(p.Delta - q.Delta[:, idx]))),
        float(np.max(np.abs(p.tau - q.tau[idx]))),
        float(np.max(np.abs(p.GammaBar - q.GammaBar[np.ix_(idx, idx)]))),
    )


def equivalent_up_to_permutation(p: SunParams, q: SunParams) -> Tuple[bool, Optional[Permutation]]:
    """Test whether ``p`` and ``q`` differ only by a relabelling of the latent block.

    Returns ``(True, W)`` with ``permute_latent(q, W)`` matching ``p`` within
    ``1e-10`` entrywise, or ``(False, None)``. Canonical forms are compared
    first; when either is degenerate every permutation is tried (``m <= 8``).
    """
    if (p.d, p.m) != (q.d, q.m):
        raise DimensionMismatch(f"SUN_{{{p.d},{p.m}}} vs SUN_{{{q.d},{q.m}}}")
    if max(float(np.max(np.abs(p.xi - q.xi))), float(np.max(np.abs(p.Omega - q.Omega)))) > EQUIV_TOLERANCE:
        return False, None
    cp, cq = canonicalize_tau(p), canonicalize_tau(q)
    if not (cp.degenerate or cq.degenerate):
        W = cp.applied.inverse().compose(cq.applied)
        if _latent_gap(p, q, W.map) <= EQUIV_TOLERANCE:
            return True, W
        return False, None
    if p.m > EXHAUSTIVE_MAX_ORDER:
        raise TooLarge(f"degenerate canonical form and m={p.m} > {EXHAUSTIVE_MAX_ORDER}")
    for W in Permutation.all(p.m):
        if _latent_gap(p, q, W.map) <= EQUIV_TOLERANCE:
            return True, W
    return False, None


# identifiable sub-models

class SubmodelKind(enum.Enum):
    EQUICORR = "equicorr"
    ORDERED_TAU = "ordered_tau"
    SPATIAL = "spatial"
    FS_CSN = "fs_csn"
    FACTOR_LAMBDA = "factor_lambda"


@dataclass(frozen=True)
class SubmodelSpec:
    """A sub-model kind plus the arguments of its constructor."""

    kind: SubmodelKind
    values: Dict[str, Any] = field(default_factory=dict)

    def build(self) -> SunParams:
        return _BUILDERS[self.kind](**self.values)


def make_equicorr(xi, Omega, delta, tau: float, rho: float, m: int) -> SunParams:
    """``tau 1_m``, ``Delta = delta 1_m^T`` and equicorrelated ``GammaBar``.

    Every latent permutation leaves these parameters unchanged.
    """
    xi = as_vector(xi, what="xi")
    delta = as_vector(delta, xi.shape[0], "delta")
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    G = np.full((m, m), float(rho))
    np.fill_diagonal(G, 1.0)
    return SunParams(xi, Omega, np.repeat(delta[:, None], m, axis=1), np.full(m, float(tau)), G)


def make_ordered_tau(xi, Omega, Delta, GammaBar, alpha: float, beta: float, m: int,
                     convention: str = "zero_based") -> SunParams:
    """``tau = alpha 1_m + beta j_m`` with ``j_m = (0, ..., m-1)`` or ``(1, ..., m)``."""
    if beta == 0:
        raise ZeroBeta("beta must be nonzero for tau to separate the latent coordinates")
    if convention == "zero_based":
        j = np.arange(m, dtype=float)
    elif convention == "one_based":
        j = np.arange(1, m + 1, dtype=float)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return SunParams(xi, Omega, Delta, alpha + beta * j, GammaBar)


def make_spatial(xi, omega2: float, delta: float, OmegaBar) -> SunParams:
    """``SUN_{n,n}(xi, omega2 OmegaBar, omega delta (1+delta^2)^{-1/2} OmegaBar, 0, OmegaBar)``.

    The stored ``Delta`` is on the correlation scale, so the common ``omega``
    factor drops out.
    """
    if not omega2 > 0:
        raise NonPositiveScale("omega2 must be positive")
    R = sym(OmegaBar)
    n = R.shape[0]
    return SunParams(xi, omega2 * R, delta / math.sqrt(1.0 + delta * delta) * R, np.zeros(n), R)


def make_fs_csn(xi, Omega, lam: float) -> SunParams:
    """``SUN_{n,n}(xi, Omega, lam OmegaBar^{-1/2}, 0, I_n)`` with the inverse
    lower Cholesky factor of ``OmegaBar`` as the inverse square root."""
    Omega = sym(Omega)
    n = Omega.shape[0]
    w = np.sqrt(np.diag(Omega))
    L = cholesky(Omega / np.outer(w, w), "OmegaBar")
    Linv = np.linalg.solve(L, np.eye(n))
    return SunParams(xi, Omega, lam * Linv, np.zeros(n), np.eye(n))


@dataclass(frozen=True)
class FactorModel:
    """``Y = xi + Psi^{1/2} (Lambda Z + V)`` with ``Z`` the latent block
    truncated to ``Z + tau > 0``; ``Psi^{1/2}`` is the lower Cholesky factor."""

    xi: np.ndarray
    Psi: np.ndarray
    Lambda: np.ndarray
    tau: np.ndarray
    chol_psi: np.ndarray
    params: SunParams

    @property
    def d(self) -> int:
        return self.xi.shape[0]

    @property
    def m(self) -> int:
        return self.tau.shape[0]


def factor_model(xi, Psi, Lambda, tau) -> FactorModel:
    xi = as_vector(xi, what="xi")
    d = xi.shape[0]
    tau = as_vector(tau, what="tau")
    m = tau.shape[0]
    Lambda = as_matrix(_lift(Lambda, (d, m)), (d, m), "Lambda")
    Psi = sym(as_matrix(Psi, (d, d), "Psi"))
    LtL = Lambda.T @ Lambda
    off = LtL - np.diag(np.diag(LtL))
    if np.any(np.abs(off) > DIAGONAL_TOLERANCE):
        raise NotDiagonal("Lambda^T Lambda must be diagonal")
    if m > 1 and not np.all(np.diff(np.diag(LtL)) > 0) and not np.all(np.diff(tau) > 0):
        raise NotOrdered("diag(Lambda^T Lambda) must be strictly ascending (or tau strictly ordered)")
    Lpsi = cholesky(Psi, "Psi")
    LL = Lpsi @ Lambda
    Omega = sym(Lpsi @ (np.eye(d) + Lambda @ Lambda.T) @ Lpsi.T)
    omega = np.sqrt(np.diag(Omega))
    params = SunParams(xi, Omega, LL / omega[:, None], tau, np.eye(m))
    return FactorModel(xi, Psi, Lambda, tau, Lpsi, params)


def make_factor_lambda(xi, Psi, Lambda, tau) -> SunParams:
    """SUN parameters of the factor sub-model: ``Omega = Psi^{1/2}(I + Lambda Lambda^T)Psi^{1/2 T}``,
    ``omega Delta = Psi^{1/2} Lambda`` and ``GammaBar = I_m``."""
    return factor_model(xi, Psi, Lambda, tau).params


def factor_logpdf(fm: FactorModel, y):
    """Log density of the factor sub-model through its product form.

    Exact up to rounding (no QMC), so the returned error is zero.
    """
    Y, single = _points(y, fm.d)
    p = fm.params
    base = np.atleast_1d(mvn_pdf_log(Y, p.xi, p.Omega))
    W = np.linalg.solve(fm.chol_psi, (Y - fm.xi).T)  # Psi^{-1/2}(y - xi)
    K = np.eye(fm.d) + fm.Lambda @ fm.Lambda.T
    mu = (fm.Lambda.T @ np.linalg.solve(K, W)).T
    scale = np.sqrt(1.0 + np.diag(fm.Lambda.T @ fm.Lambda))
    num = np.sum(special.log_ndtr(scale * (fm.tau + mu)), axis=1)
    den = float(np.sum(special.log_ndtr(fm.tau)))
    out = base + num - den
    err = np.zeros_like(out)
    if single:
        return float(out[0]), 0.0
    return out, err


_BUILDERS = {
    SubmodelKind.EQUICORR: make_equicorr,
    SubmodelKind.ORDERED_TAU: make_ordered_tau,
    SubmodelKind.SPATIAL: make_spatial,
    SubmodelKind.FS_CSN: make_fs_csn,
    SubmodelKind.FACTOR_LAMBDA: make_factor_lambda,
}
