"""Green's function kernels and Galerkin panel integrals."""
from .api import (
    PanelPairIntegrals,
    classify_pair,
    panel_pair,
    panel_pair_derivative,
    scalar_kernel,
)
from .backend import NAME as BACKEND
from .panels import DEFAULT_SETTINGS, PanelSet, QuadratureSettings

__all__ = [
    "BACKEND", "DEFAULT_SETTINGS", "PanelPairIntegrals", "PanelSet",
    "QuadratureSettings", "classify_pair", "panel_pair", "panel_pair_derivative",
    "scalar_kernel",
]
