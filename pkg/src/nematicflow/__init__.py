"""Pseudo-spectral Q-tensor flow simulator with a verification harness."""

__version__ = "0.1.0"

from .landau_de_gennes import EnergyReport, MaterialParams  # noqa: E402
from .spectral_domain import SpectralGrid  # noqa: E402
from .state import SimState  # noqa: E402

__all__ = ["EnergyReport", "MaterialParams", "SimState", "SpectralGrid", "__version__"]
