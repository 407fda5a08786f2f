"""MCMC kernels and chain orchestration."""

from .chain import Chain, ChainConfig, Sampler, SamplerError, param_names, run_chain, run_chains, run_tqr
from .mh import MHTuner

__all__ = [
    "Chain", "ChainConfig", "MHTuner", "Sampler", "SamplerError", "param_names",
    "run_chain", "run_chains", "run_tqr",
]
