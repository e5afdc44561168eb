"""Exact sampling two ways, checked against the density.

The selection sampler proposes joint normal vectors and keeps those whose
latent part clears the thresholds; its acceptance rate is an orthant
probability that we can compute in advance. For the factor model the same
law has an additive form that needs no rejection.
"""
import numpy as np
from scipy import integrate, stats

from sunkit import SunParams, sun_pdf
from sunkit.canonical import factor_model
from sunkit.sampler import RngStream, estimate_acceptance, sample_factor, sample_selection

p = SunParams([0.0], [[1.0]], [[0.5, -0.6]], [0.3, -0.4], [[1.0, 0.2], [0.2, 1.0]])
batch = sample_selection(p, 50_000, RngStream(seed=11))
rate = estimate_acceptance(p)
print(f"predicted acceptance {rate.value:.4f}, observed {batch.acceptance_rate:.4f} "
      f"over {batch.proposals_used} proposals")

edges = np.linspace(-3.5, 3.5, 15)
counts, _ = np.histogram(batch.draws[:, 0], bins=edges)
mid = 0.5 * (edges[1:] + edges[:-1])
# bin probabilities from the density integrated on a fine grid
grid = np.linspace(-12, 12, 12001)
cdf = integrate.cumulative_trapezoid(sun_pdf(p, grid)[0], grid, initial=0.0)
expected = np.diff(np.interp(edges, grid, cdf)) * batch.n
print("\n   bin centre   observed   expected")
for c, o, e in zip(mid, counts, expected):
    print(f"   {c:>10.2f} {o:>10d} {e:>10.1f}")

fm = factor_model([1.0, -1.0], [[1.0, 0.3], [0.3, 1.5]], [[0.3, 0.8], [0.4, -0.6]], [0.0, 0.5])
a = sample_factor(fm, 20_000, RngStream(seed=11, stream=1)).draws
s = sample_selection(fm.params, 20_000, RngStream(seed=11, stream=2)).draws
print("\nfactor model: additive sampler vs selection sampler")
for j in range(2):
    ks = stats.ks_2samp(a[:, j], s[:, j])
    print(f"  coordinate {j}: means {a[:, j].mean():.3f} / {s[:, j].mean():.3f}, two-sample KS p = {ks.pvalue:.3f}")
