"""Pruning-aware adaptive gradient optimization toolkit."""

from .core import DivergedError, Problem, RunRecord, masked_norm
from .optimizer import PrunAdagState, prunadag_iterate, run
from .steps import Classification, Variant

__all__ = [
    "Classification",
    "DivergedError",
    "Problem",
    "PrunAdagState",
    "RunRecord",
    "Variant",
    "masked_norm",
    "prunadag_iterate",
    "run",
]

__version__ = "0.1.0"
