import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from sunkit.core import (
    CsnParams,
    SunParams,
    csn_logpdf,
    csn_rescale,
    random_csn_params,
    random_sun_params,
    sun_logpdf,
    sun_mode_free_normal_reduction_check,
    sun_pdf,
    sun_validate,
)
from sunkit.errors import (
    DimensionMismatch,
    NonPositiveScale,
    NotPositiveDefinite,
    Underflow,
    UnitDiagonalViolation,
)
from sunkit.gauss import QmcConfig, mvn_pdf_log

PHI0 = 1 / math.sqrt(2 * math.pi)
COARSE = QmcConfig(target_abs_error=1e-5)


def sn1(delta, tau=0.0):
    return SunParams([0.0], [[1.0]], [[delta]], [tau], [[1.0]])


def test_validate_examples():
    p = sun_validate([0], [[1]], [[0.5]], [0], [[1]])
    assert (p.d, p.m) == (1, 1)
    assert np.allclose(p.assembled, [[1, 0.5], [0.5, 1]])
    with pytest.raises(NotPositiveDefinite) as e:
        sun_validate([0], [[1]], [[1.0]], [0], [[1]])
    assert e.value.block == "assembled correlation"
    with pytest.raises(UnitDiagonalViolation):
        sun_validate([0, 0], np.eye(2), np.zeros((2, 2)), [0, 0], [[1.1, 0], [0, 1]])


def test_validate_errors_name_the_block():
    with pytest.raises(NotPositiveDefinite) as e:
        sun_validate([0, 0], [[1, 2], [2, 1]], np.zeros((2, 1)), [0], [[1]])
    assert e.value.block == "Omega"
    with pytest.raises(NotPositiveDefinite) as e:
        sun_validate([0], [[1]], [[0, 0]], [0, 0], [[1, 1], [1, 1]])
    assert e.value.block == "GammaBar"
    with pytest.raises(DimensionMismatch):
        sun_validate([0, 0], np.eye(2), np.zeros((3, 1)), [0], [[1]])


def test_params_are_immutable():
    p = sn1(0.5)
    with pytest.raises(ValueError):
        p.tau[0] = 1.0


def test_cached_quantities():
    rng = np.random.default_rng(0)
    p = random_sun_params(3, 2, rng)
    assert np.allclose(p.omega, np.sqrt(np.diag(p.Omega)))
    assert np.allclose(p.OmegaBar * np.outer(p.omega, p.omega), p.Omega)
    assert np.allclose(p.cond_cov, p.GammaBar - p.Delta.T @ np.linalg.solve(p.OmegaBar, p.Delta))
    L = p.chol_assembled
    assert np.allclose(L @ L.T, p.assembled)
    assert not p.ridged


def test_reduction_check():
    assert sun_mode_free_normal_reduction_check(sn1(0.0))
    assert not sun_mode_free_normal_reduction_check(sn1(0.5))
    assert not sun_mode_free_normal_reduction_check(sn1(1e-20))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_zero_delta_is_gaussian(d, m, seed):
    rng = np.random.default_rng(seed)
    p = random_sun_params(d, m, rng).replace(Delta=np.zeros((d, m)))
    Y = rng.standard_normal((5, d))
    lp, err = sun_logpdf(p, Y)
    assert np.array_equal(lp, mvn_pdf_log(Y, p.xi, p.Omega))
    assert np.all(err == 0)


def test_symmetric_point():
    lp, err = sun_logpdf(sn1(0.5), [0.0])
    assert abs(math.exp(lp) - PHI0) <= 1e-12 and err == 0.0
    assert abs(math.exp(lp) - 0.3989423) < 1e-7


def test_univariate_skew_normal_value():
    # oracle: 2 phi(y) Phi(alpha y), alpha = delta / sqrt(1 - delta^2) = 0.75
    alpha = 0.6 / math.sqrt(1 - 0.36)
    assert abs(alpha - 0.75) < 1e-15
    expected = 2 * stats.norm.pdf(1.0) * stats.norm.cdf(alpha)
    assert abs(expected - stats.skewnorm(0.75).pdf(1.0)) < 1e-15
    v, err = sun_pdf(sn1(0.6), [1.0])
    assert abs(v - expected) <= 1e-12
    assert abs(v - 0.3742671) < 1e-7


def test_points_shapes():
    p = sn1(0.3)
    lp, _ = sun_logpdf(p, np.array([0.0, 1.0, 2.0]))
    assert lp.shape == (3,)
    q = random_sun_params(2, 1, np.random.default_rng(1))
    assert isinstance(sun_logpdf(q, [0.0, 1.0])[0], float)
    with pytest.raises(DimensionMismatch):
        sun_logpdf(q, [0.0, 1.0, 2.0])


def _alpha(p):
    delta = p.Delta[:, 0]
    w = np.linalg.solve(p.OmegaBar, delta)
    return w / math.sqrt(1 - delta @ w)


def test_m1_alpha_mapping_against_quadrature():
    # the alpha form must give a normalized density: integrate in 1-d first
    for delta in (-0.9, -0.3, 0.2, 0.7):
        a = delta / math.sqrt(1 - delta**2)
        mass, _ = integrate.quad(lambda y: 2 * stats.norm.pdf(y) * stats.norm.cdf(a * y), -40, 40)
        assert abs(mass - 1) < 1e-10
        f = lambda y: math.exp(sun_logpdf(sn1(delta), [y])[0])
        for y in (-1.5, 0.3, 2.0):
            assert abs(f(y) - 2 * stats.norm.pdf(y) * stats.norm.cdf(a * y)) < 1e-12


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_m1_tau0_reduction(d, seed):
    rng = np.random.default_rng(seed)
    p = random_sun_params(d, 1, rng).replace(tau=[0.0])
    alpha = _alpha(p)
    Y = p.xi + 2 * rng.standard_normal((100, d)) * p.omega
    lp, err = sun_logpdf(p, Y)
    ref = math.log(2) + mvn_pdf_log(Y, p.xi, p.Omega) + stats.norm.logcdf(((Y - p.xi) / p.omega) @ alpha)
    assert np.all(np.abs(lp - ref) <= 2 * err + 1e-10)


def _trapezoid_mass(p, n=401, cfg=COARSE):
    if p.d == 1:
        g = p.xi[0] + p.omega[0] * np.linspace(-10, 10, n)
        return np.trapezoid(sun_pdf(p, g, cfg)[0], g)
    g1 = p.xi[0] + p.omega[0] * np.linspace(-10, 10, n)
    g2 = p.xi[1] + p.omega[1] * np.linspace(-10, 10, n)
    Y = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1).reshape(-1, 2)
    f = sun_pdf(p, Y, cfg)[0].reshape(n, n)
    return np.trapezoid(np.trapezoid(f, g2, axis=1), g1)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_normalization_d1(m):
    p = random_sun_params(1, m, np.random.default_rng(40 + m))
    assert abs(_trapezoid_mass(p) - 1) <= 1e-2


def test_normalization_d2():
    p = random_sun_params(2, 2, np.random.default_rng(7))
    assert abs(_trapezoid_mass(p, n=81) - 1) <= 1e-2


def test_ridge_near_boundary():
    # the second latent is almost a combination of the observed pair, with
    # the weight on the coordinate that comes first in the assembled order
    b, s2 = 0.01, 5e-13
    a = math.sqrt(1 - b * b - s2)
    Delta = np.array([[0.0, a], [0.0, b]])
    p = SunParams([0.0, 0.0], np.eye(2), Delta, [0.0, 0.0], np.eye(2))
    assert p.ridged
    lp, err = sun_logpdf(p, [0.2, -0.1])
    assert math.isfinite(lp) and err >= 1e-6


def test_underflow_is_reported():
    rng = np.random.default_rng(5)
    p = random_sun_params(1, 2, rng).replace(tau=[0.0, 0.0], Delta=[[0.7, 0.7]], GammaBar=[[1, 0.5], [0.5, 1]])
    with pytest.raises(Underflow):
        sun_logpdf(p, [p.xi[0] - 80 * p.omega[0]])


def test_m1_far_tail_stays_finite():
    lp, err = sun_logpdf(sn1(0.95), [-60.0])
    a = 0.95 / math.sqrt(1 - 0.95**2)
    assert abs(lp - (math.log(2) + stats.norm.logpdf(-60) + stats.norm.logcdf(-60 * a))) < 1e-9


def test_csn_examples():
    p = CsnParams([0.0], [[1.0]], [[0.0]], [0.0], [[1.0]])
    lp, _ = csn_logpdf(p, [0.7])
    assert abs(lp - stats.norm.logpdf(0.7)) < 1e-14
    p = CsnParams([0.0], [[1.0]], [[1.0]], [0.0], [[1.0]])
    assert abs(math.exp(csn_logpdf(p, [0.0])[0]) - 0.3989423) < 1e-7
    # oracle: phi(1) Phi(1) / (1/2)
    expected = stats.norm.pdf(1.0) * stats.norm.cdf(1.0) / 0.5
    assert abs(math.exp(csn_logpdf(p, [1.0])[0]) - expected) < 1e-12


def test_csn_zero_D_is_gaussian(rng):
    p = random_csn_params(3, 2, rng)
    q = CsnParams(p.mu, p.Sigma, np.zeros((2, 3)), np.zeros(2), p.DeltaC)
    Y = rng.standard_normal((4, 3))
    lp, err = csn_logpdf(q, Y)
    assert np.allclose(lp, mvn_pdf_log(Y, q.mu, q.Sigma), atol=1e-12)


def test_csn_validation():
    with pytest.raises(NotPositiveDefinite):
        CsnParams([0], [[-1]], [[1]], [0], [[1]])
    with pytest.raises(NotPositiveDefinite):
        CsnParams([0], [[1]], [[1]], [0], [[0]])


def test_csn_rescale_examples():
    p = CsnParams([0.0], [[1.0]], [[1.0]], [0.0], [[1.0]])
    assert csn_rescale(p, [1.0]) == p
    q = csn_rescale(p, [2.0])
    assert q.Dmat.tolist() == [[2.0]] and q.nu.tolist() == [0.0] and q.DeltaC.tolist() == [[4.0]]
    with pytest.raises(NonPositiveScale):
        csn_rescale(p, [0.0])
    with pytest.raises(NonPositiveScale):
        csn_rescale(p, [-1.0])


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_csn_rescale_same_density(d, m, seed):
    rng = np.random.default_rng(seed)
    p = random_csn_params(d, m, rng)
    q = csn_rescale(p, np.exp(rng.standard_normal(m)))
    Y = p.mu + rng.standard_normal((20, d))
    a, ea = csn_logpdf(p, Y)
    b, eb = csn_logpdf(q, Y)
    assert np.all(np.abs(a - b) <= 2 * (ea + eb) + 1e-12)
