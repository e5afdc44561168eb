"""SUN and CSN parameter sets and their densities."""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np
from scipy import special

from .errors import (
    DimensionMismatch,
    NonPositiveScale,
    NotPositiveDefinite,
    Underflow,
    UnitDiagonalViolation,
)
from .gauss import DEFAULT_QMC, QmcConfig, mvn_cdf_batch, mvn_pdf_log
from .numlin import as_matrix, as_vector, cholesky, sym

UNIT_DIAGONAL_TOL = 1e-12
CONDITIONAL_RIDGE = 1e-10
RIDGE_PENALTY = 1e-6
ORTHANT_FLOOR = 1e-300


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _lift(M, shape):
    # scalars and flat vectors are accepted when the target has a unit dimension
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 and M.size == shape[0] * shape[1] and 1 in shape:
        return M.reshape(shape)
    return M


class SunParams:
    """Validated parameters ``(xi, Omega, Delta, tau, GammaBar)`` of a SUN_{d,m} law.

    ``Omega`` is the scale matrix, ``Delta`` the ``d x m`` correlation-scale
    coupling between the observed and latent blocks, ``tau`` the truncation
    vector and ``GammaBar`` the latent correlation matrix. Construction
    checks every constraint and caches the factorizations the density
    needs; instances are immutable.
    """

    def __init__(self, xi, Omega, Delta, tau, GammaBar):
        xi = as_vector(xi, what="xi")
        d = xi.shape[0]
        tau = as_vector(tau, what="tau")
        m = tau.shape[0]
        Omega = sym(as_matrix(Omega, (d, d), "Omega"))
        Delta = as_matrix(_lift(Delta, (d, m)), (d, m), "Delta")
        GammaBar = sym(as_matrix(GammaBar, (m, m), "GammaBar"))

        cholesky(Omega, "Omega")
        if np.any(np.abs(np.diag(GammaBar) - 1.0) > UNIT_DIAGONAL_TOL):
            raise UnitDiagonalViolation(f"GammaBar diagonal {np.diag(GammaBar)} is not unit")
        self._chol_gamma = cholesky(GammaBar, "GammaBar")

        omega = np.sqrt(np.diag(Omega))
        OmegaBar = Omega / np.outer(omega, omega)
        np.fill_diagonal(OmegaBar, 1.0)
        self._chol_omegabar = cholesky(OmegaBar, "OmegaBar")

        star = np.block([[GammaBar, Delta.T], [Delta, OmegaBar]])
        L = cholesky(star, "assembled correlation")
        self._chol_star = L
        self.min_pivot = float(np.min(np.diag(L)) ** 2)

        B = np.linalg.solve(OmegaBar, Delta)  # OmegaBar^{-1} Delta
        cond = sym(GammaBar - Delta.T @ B)
        self.ridged = False
        try:
            cholesky(cond, "conditional covariance")
        except NotPositiveDefinite:
            cond = cond + CONDITIONAL_RIDGE * np.eye(m)
            cholesky(cond, "conditional covariance")
            self.ridged = True

        self.xi = _frozen(xi)
        self.Omega = _frozen(Omega)
        self.Delta = _frozen(Delta)
        self.tau = _frozen(tau)
        self.GammaBar = _frozen(GammaBar)
        self.omega = _frozen(omega)
        self.OmegaBar = _frozen(OmegaBar)
        self.cond_cov = _frozen(cond)
        self._slope = _frozen(B)
        self._normalizer = {}

    @property
    def d(self) -> int:
        return self.xi.shape[0]

    @property
    def m(self) -> int:
        return self.tau.shape[0]

    @property
    def assembled(self) -> np.ndarray:
        """The ``(m+d) x (m+d)`` correlation matrix of the latent construction."""
        return np.block([[self.GammaBar, self.Delta.T], [self.Delta, self.OmegaBar]])

    @property
    def chol_assembled(self) -> np.ndarray:
        return self._chol_star

    def fields(self):
        return self.xi, self.Omega, self.Delta, self.tau, self.GammaBar

    def replace(self, **kw) -> "SunParams":
        vals = dict(zip(("xi", "Omega", "Delta", "tau", "GammaBar"), self.fields()))
        vals.update(kw)
        return SunParams(**vals)

    def max_abs_diff(self, other: "SunParams") -> float:
        if (self.d, self.m) != (other.d, other.m):
            return float("inf")
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.fields(), other.fields()))

    def __eq__(self, other):
        if not isinstance(other, SunParams):
            return NotImplemented
        return (self.d, self.m) == (other.d, other.m) and all(
            np.array_equal(a, b) for a, b in zip(self.fields(), other.fields())
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"SunParams(d={self.d}, m={self.m}, xi={self.xi.tolist()}, tau={self.tau.tolist()})"
        )

    def latent_mean(self, y) -> np.ndarray:
        """``tau + Delta^T OmegaBar^{-1} omega^{-1} (y - xi)`` row-wise."""
        z = (np.atleast_2d(y) - self.xi) / self.omega
        return self.tau + z @ self._slope

    def log_normalizer(self, cfg: QmcConfig = DEFAULT_QMC) -> Tuple[float, float]:
        """``log Phi_m(tau; GammaBar)`` and its error estimate, cached per config."""
        if cfg not in self._normalizer:
            v, e = log_orthant(self.tau, self.GammaBar, cfg)
            self._normalizer[cfg] = (float(v[0]), float(e[0]))
        return self._normalizer[cfg]


class CsnParams:
    """Validated parameters ``(mu, Sigma, Dmat, nu, DeltaC)`` of a CSN_{d,m} law."""

    def __init__(self, mu, Sigma, Dmat, nu, DeltaC):
        mu = as_vector(mu, what="mu")
        d = mu.shape[0]
        nu = as_vector(nu, what="nu")
        m = nu.shape[0]
        Sigma = sym(as_matrix(Sigma, (d, d), "Sigma"))
        Dmat = as_matrix(_lift(Dmat, (m, d)), (m, d), "Dmat")
        DeltaC = sym(as_matrix(DeltaC, (m, m), "DeltaC"))
        cholesky(Sigma, "Sigma")
        cholesky(DeltaC, "DeltaC")
        self.mu = _frozen(mu)
        self.Sigma = _frozen(Sigma)
        self.Dmat = _frozen(Dmat)
        self.nu = _frozen(nu)
        self.DeltaC = _frozen(DeltaC)
        self.marginal_cov = _frozen(sym(DeltaC + Dmat @ Sigma @ Dmat.T))

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        return self.nu.shape[0]

    def fields(self):
        return self.mu, self.Sigma, self.Dmat, self.nu, self.DeltaC

    def __eq__(self, other):
        if not isinstance(other, CsnParams):
            return NotImplemented
        return (self.d, self.m) == (other.d, other.m) and all(
            np.array_equal(a, b) for a, b in zip(self.fields(), other.fields())
        )

    __hash__ = None

    def __repr__(self):
        return f"CsnParams(d={self.d}, m={self.m}, mu={self.mu.tolist()}, nu={self.nu.tolist()})"


def sun_validate(xi, Omega, Delta, tau, GammaBar) -> SunParams:
    return SunParams(xi, Omega, Delta, tau, GammaBar)


def csn_validate(mu, Sigma, Dmat, nu, DeltaC) -> CsnParams:
    return CsnParams(mu, Sigma, Dmat, nu, DeltaC)


def sun_mode_free_normal_reduction_check(p: SunParams) -> bool:
    """True iff ``Delta`` is exactly zero, so the law is plain normal."""
    return not np.any(p.Delta)


def _points(y, d: int) -> Tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        return y.reshape(1, 1), True
    if y.ndim == 1:
        if y.shape[0] == d:
            return y[None, :], True
        if d == 1:
            return y[:, None], False
    elif y.ndim == 2 and y.shape[1] == d:
        return y, False
    raise DimensionMismatch(f"points of shape {y.shape} do not match dimension {d}")


def log_orthant(upper, cov, cfg: QmcConfig = DEFAULT_QMC):
    """``log Phi_m(upper; cov)`` row-wise with absolute error estimates.

    ``m == 1`` is evaluated directly on the log scale (no underflow);
    otherwise probabilities below ``1e-300`` raise :class:`Underflow`.
    """
    upper = np.array(upper, dtype=float, ndmin=2)
    cov = np.atleast_2d(cov)
    if cov.shape == (1, 1):
        return special.log_ndtr(upper[:, 0] / math.sqrt(cov[0, 0])), np.zeros(upper.shape[0])
    v, e, _ = mvn_cdf_batch(upper, cov, cfg)
    if np.any(v < ORTHANT_FLOOR):
        raise Underflow("orthant probability below 1e-300")
    return np.log(v), e / v


def sun_logpdf(p: SunParams, y, cfg: QmcConfig = DEFAULT_QMC):
    """Log density of SUN_{d,m} and its error estimate.

    ``y`` may be a single point of length ``d`` or an ``(n, d)`` array (for
    ``d == 1`` a flat array of points is accepted too). The error estimate
    is the sum of the relative errors of the two orthant probabilities,
    i.e. an absolute error on the log scale. For ``m == 1`` both terms are
    exact log normal CDFs and the error is zero.
    """
    Y, single = _points(y, p.d)
    base = np.atleast_1d(mvn_pdf_log(Y, p.xi, p.Omega))
    if sun_mode_free_normal_reduction_check(p):
        err = np.zeros_like(base)
    else:
        num, num_err = log_orthant(p.latent_mean(Y), p.cond_cov, cfg)
        den, den_err = p.log_normalizer(cfg)
        base = base + num - den
        err = num_err + den_err
        if p.ridged:
            err = err + RIDGE_PENALTY
    if single:
        return float(base[0]), float(err[0])
    return base, err


def sun_pdf(p: SunParams, y, cfg: QmcConfig = DEFAULT_QMC):
    lp, err = sun_logpdf(p, y, cfg)
    return np.exp(lp), err


def csn_logpdf(p: CsnParams, y, cfg: QmcConfig = DEFAULT_QMC):
    """Log density of CSN_{d,m} and its error estimate (same conventions as :func:`sun_logpdf`)."""
    Y, single = _points(y, p.d)
    base = np.atleast_1d(mvn_pdf_log(Y, p.mu, p.Sigma))
    num, num_err = log_orthant((Y - p.mu) @ p.Dmat.T - p.nu, p.DeltaC, cfg)
    den, den_err = log_orthant(-p.nu, p.marginal_cov, cfg)
    base = base + num - den
    err = num_err + den_err
    if single:
        return float(base[0]), float(err[0])
    return base, err


def csn_rescale(p: CsnParams, g) -> CsnParams:
    """Scale the latent block by ``diag(g)``; the distribution is unchanged."""
    g = as_vector(g, p.m, "g")
    if np.any(~(g > 0)):
        raise NonPositiveScale("every latent scale must be positive")
    return CsnParams(p.mu, p.Sigma, g[:, None] * p.Dmat, g * p.nu, np.outer(g, g) * p.DeltaC)


def random_correlation(n: int, rng: np.random.Generator, extra: int = 2) -> np.ndarray:
    A = rng.standard_normal((n, n + extra))
    S = A @ A.T
    s = np.sqrt(np.diag(S))
    R = S / np.outer(s, s)
    np.fill_diagonal(R, 1.0)
    return R


def random_sun_params(
    d: int,
    m: int,
    rng: np.random.Generator,
    tau_scale: float = 1.0,
    extra: int = 2,
) -> SunParams:
    """Draw a valid SunParams: a random correlation matrix split into blocks,
    random positive scales, normal location and normal ``tau``."""
    R = random_correlation(m + d, rng, extra)
    omega = np.exp(0.3 * rng.standard_normal(d))
    OmegaBar = R[m:, m:]
    return SunParams(
        xi=rng.standard_normal(d),
        Omega=OmegaBar * np.outer(omega, omega),
        Delta=R[m:, :m],
        tau=tau_scale * rng.standard_normal(m),
        GammaBar=R[:m, :m],
    )


def random_csn_params(d: int, m: int, rng: np.random.Generator) -> CsnParams:
    A = rng.standard_normal((d, d + 2))
    B = rng.standard_normal((m, m + 2))
    return CsnParams(
        mu=rng.standard_normal(d),
        Sigma=A @ A.T / (d + 2),
        Dmat=rng.standard_normal((m, d)),
        nu=0.5 * rng.standard_normal(m),
        DeltaC=B @ B.T / (m + 2),
    )
