"""Unified skew-normal (SUN) distributions: densities, closure operations,
latent-permutation identifiability tools and exact samplers."""

__version__ = "0.1.0"

from .algebra import (
    CommutationReport,
    OrthantRegion,
    PartitionSpec,
    affine_transform,
    conditional,
    marginal,
    permutation_commutes_report,
    permute_latent,
    selection_logpdf,
)
from .canonical import (
    CanonicalForm,
    FactorModel,
    Strategy,
    SubmodelKind,
    SubmodelSpec,
    canonicalize_eigen,
    canonicalize_tau,
    equivalent_up_to_permutation,
    factor_logpdf,
    factor_model,
    make_equicorr,
    make_factor_lambda,
    make_fs_csn,
    make_ordered_tau,
    make_spatial,
)
from .core import (
    CsnParams,
    SunParams,
    csn_logpdf,
    csn_rescale,
    csn_validate,
    random_sun_params,
    sun_logpdf,
    sun_mode_free_normal_reduction_check,
    sun_pdf,
    sun_validate,
)
from .errors import *  # noqa: F401,F403
from .gauss import DEFAULT_QMC, OrthantResult, QmcConfig, mvn_cdf, mvn_cdf_shifted, mvn_pdf_log
from .numlin import Permutation, monomial_factorize, orthant_order_preserved
from .sampler import RngStream, SampleBatch, estimate_acceptance, sample_factor, sample_selection
