"""Exact SUN sampling by latent selection, and the additive representation
of the factor sub-model.

Every generator is Philox4x64 keyed by ``SeedSequence(seed, spawn_key=(stream,))``
so identical ``(seed, stream)`` pairs give bitwise identical draws on every
platform numpy supports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .canonical import FactorModel
from .core import SunParams
from .errors import LowAcceptance, ProposalBudgetExhausted
from .gauss import DEFAULT_QMC, OrthantResult, QmcConfig, mvn_cdf

MIN_ACCEPTANCE = 1e-4
_MAX_CHUNK = 1 << 18


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleBatch:
    draws: np.ndarray
    acceptance_rate: float
    proposals_used: int

    @property
    def n(self) -> int:
        return self.draws.shape[0]


def estimate_acceptance(p: SunParams, cfg: QmcConfig = DEFAULT_QMC) -> OrthantResult:
    """``Phi_m(tau; GammaBar)``, the expected acceptance rate of :func:`sample_selection`."""
    return mvn_cdf(p.tau, p.GammaBar, cfg)


def _batch(draws, proposals):
    n = draws.shape[0]
    return SampleBatch(draws, n / proposals if proposals else 0.0, int(proposals))


def sample_selection(
    p: SunParams,
    n: int,
    rng: RngStream,
    max_proposals: Optional[int] = None,
    allow_low_acceptance: bool = False,
    cfg: QmcConfig = DEFAULT_QMC,
) -> SampleBatch:
    """Draw ``n`` variates by proposing ``(U0, U1) ~ N(0, OmegaBar*)`` and
    keeping ``xi + omega U1`` whenever ``U0 + tau > 0``.

    ``proposals_used`` counts proposals up to and including the ``n``-th
    acceptance. Below an expected acceptance rate of ``1e-4`` the call is
    refused unless ``allow_low_acceptance`` is set. The default proposal
    budget is ``20 n / rate + 10^4``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rate = estimate_acceptance(p, cfg).value
    if rate < MIN_ACCEPTANCE and not allow_low_acceptance:
        cost = math.inf if rate <= 0 else n / rate
        raise LowAcceptance(
            f"expected acceptance rate {rate:.3e} is below {MIN_ACCEPTANCE:g} "
            f"(about {cost:.3g} proposals needed)",
            expected_rate=rate,
        )
    if max_proposals is None:
        max_proposals = int(min(20.0 * n / max(rate, 1e-12) + 10_000, 2**62))
    gen = rng.generator()
    L = p.chol_assembled
    m, d = p.m, p.d
    kept = []
    got = 0
    used = 0
    while got < n and used < max_proposals:
        want = int(min((n - got) / max(rate, 1e-12) * 1.1 + 64, _MAX_CHUNK, max_proposals - used))
        X = gen.standard_normal((want, m + d)) @ L.T
        ok = np.all(X[:, :m] + p.tau > 0, axis=1)
        hits = np.flatnonzero(ok)
        if hits.size >= n - got:
            last = hits[n - got - 1]
            hits = hits[: n - got]
            used += int(last) + 1
        else:
            used += want
        kept.append(X[hits, m:])
        got += hits.size
    U1 = np.concatenate(kept, axis=0) if kept else np.zeros((0, d))
    draws = p.xi + p.omega * U1
    if got < n:
        raise ProposalBudgetExhausted(
            f"accepted {got} of {n} draws within {max_proposals} proposals",
            partial=_batch(draws, used),
        )
    return _batch(draws, used)


def truncated_normal_upper(tau: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws of ``W ~ N(0, 1)`` restricted to ``W < tau``.

    Works on the log scale, ``W = Phi^{-1}(exp(log u + log Phi(tau)))``, so
    deep tails keep full relative precision.
    """
    return special.ndtri_exp(np.log(u) + special.log_ndtr(tau))


def sample_factor(fm: FactorModel, n: int, rng: RngStream) -> SampleBatch:
    """Exact draws of ``xi + Psi^{1/2} (Lambda Z + V)`` with independent
    truncated normal latents ``Z_i > -tau_i`` and ``V ~ N_d(0, I)``."""
    if n < 1:
        raise ValueError("n must be positive")
    gen = rng.generator()
    u = gen.random((n, fm.m))
    # avoid log(0); u = 0 has probability 2^-53
    u = np.maximum(u, np.finfo(float).tiny)
    Z = -truncated_normal_upper(fm.tau, u)
    V = gen.standard_normal((n, fm.d))
    Y = fm.xi + (Z @ fm.Lambda.T + V) @ fm.chol_psi.T
    return SampleBatch(Y, 1.0, n)
