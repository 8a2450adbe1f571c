"""Conformal prediction regions from kernel density conformity scores."""

from conformal_density.conformal import (
    ConformalModel,
    RegionKind,
    alpha_tilde,
    conformal_member,
    conformal_pvalue,
    levelset_member,
    sandwich_cutoffs,
)
from conformal_density.density import Dataset, DensityEstimate, augmented_eval, kde_eval
from conformal_density.kernels import KernelSpec, eval_kernel, product_kernel, validate_beta

__all__ = [
    "ConformalModel",
    "Dataset",
    "DensityEstimate",
    "KernelSpec",
    "RegionKind",
    "alpha_tilde",
    "augmented_eval",
    "conformal_member",
    "conformal_pvalue",
    "eval_kernel",
    "kde_eval",
    "levelset_member",
    "product_kernel",
    "sandwich_cutoffs",
    "validate_beta",
]
