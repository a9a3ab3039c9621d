"""Fluctuation identities for skip-free downward Markov chains."""

from .errors import (
    ConfigError,
    ExcessiveCapping,
    InvalidFamily,
    MbpAtZero,
    ModeError,
    ModelError,
    NonConvergent,
    RecurrentChain,
    ScaleOverflow,
    SeriesTruncation,
    SingularGenerator,
    SkipFreeError,
)
from .measures import ProbMeasure

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExcessiveCapping",
    "InvalidFamily",
    "MbpAtZero",
    "ModeError",
    "ModelError",
    "NonConvergent",
    "ProbMeasure",
    "RecurrentChain",
    "ScaleOverflow",
    "SeriesTruncation",
    "SingularGenerator",
    "SkipFreeError",
]
