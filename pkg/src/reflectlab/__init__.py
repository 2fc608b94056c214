"""Shock polars, regular reflection and its linearized/perturbed free-boundary problem
for self-similar polytropic potential flow."""

__version__ = "0.1.0"

from .errors import DomainError, RegimeError, SolverError  # noqa: E402
from .gas import GasConstants, ThermoState  # noqa: E402

__all__ = ["DomainError", "GasConstants", "RegimeError", "SolverError", "ThermoState", "__version__"]
