"""Bayesian endogenous Tobit quantile regression with parametric and
Dirichlet-process first-stage errors."""

from .model import CensoredDataset, Family, ModelSpec, PriorConfig, prior_preset
from .samplers import ChainConfig, run_chain, run_chains, run_tqr

__version__ = "0.1.0"

__all__ = [
    "CensoredDataset", "ChainConfig", "Family", "ModelSpec", "PriorConfig", "prior_preset",
    "run_chain", "run_chains", "run_tqr", "__version__",
]
