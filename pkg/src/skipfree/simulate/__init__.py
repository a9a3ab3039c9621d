"""Monte Carlo sampler for finite chains, compound Poisson and branching models.

Paths follow the holding-time / jump-chain construction: an exponential
holding time with the total rate, then a transition drawn in proportion
to the rates, with the cemetery as one of the destinations.
"""
from .engine import (
    TERMINALS,
    Estimate,
    Event,
    PathOutcome,
    SimConfig,
    estimate,
    sample_path,
)
from .model import KernelModel, compile_model

__all__ = [
    "TERMINALS",
    "Estimate",
    "Event",
    "KernelModel",
    "PathOutcome",
    "SimConfig",
    "compile_model",
    "estimate",
    "sample_path",
]
