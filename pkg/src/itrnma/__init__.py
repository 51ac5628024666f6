"""Doubly-robust Bayesian estimation of individualized treatment rules
pooled across studies with network meta-analysis."""

from .bbdwols import BbConfig, BlipPosterior, run_bbdwols, run_qlearning
from .core import CovariateSpec, FormulaRoles, StudyDataset, build_design, validate_dataset
from .netmap import TreatmentNetwork, build_U, build_V, consistency_contrast
from .nma import (
    NmaConfig,
    NmaPosterior,
    common_effects_moments,
    fit_common_effects,
    fit_nma,
    fit_random_effects,
    profile_effects,
    sparsify_cov,
)
from .simlab import DgmSpec, Scenario, run_scenario, score, simulate_network

__version__ = "0.1.0"

__all__ = [
    "BbConfig",
    "BlipPosterior",
    "CovariateSpec",
    "DgmSpec",
    "FormulaRoles",
    "NmaConfig",
    "NmaPosterior",
    "Scenario",
    "StudyDataset",
    "TreatmentNetwork",
    "build_U",
    "build_V",
    "build_design",
    "common_effects_moments",
    "consistency_contrast",
    "fit_common_effects",
    "fit_nma",
    "fit_random_effects",
    "profile_effects",
    "run_bbdwols",
    "run_qlearning",
    "run_scenario",
    "score",
    "simulate_network",
    "sparsify_cov",
    "validate_dataset",
]
