"""Indifference pricing of American calls on non-traded assets."""

from .domain import (GridSpec, ModelParams, OutOfDomainError, Surface, ValidationError,
                     ValueQuery, validate_params)
from .penalty import SolverError
from .pricing import PriceModel, forward_performance
from .vi import FreeBoundary, ViSolution, extract_boundary, solve_vi_penalty, solve_vi_projected

__all__ = [
    "FreeBoundary", "GridSpec", "ModelParams", "OutOfDomainError", "PriceModel",
    "SolverError", "Surface", "ValidationError", "ValueQuery", "ViSolution",
    "extract_boundary", "forward_performance", "solve_vi_penalty", "solve_vi_projected",
    "validate_params",
]
