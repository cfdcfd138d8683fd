"""Stability laboratory for magnetizable piezoelectric/elastic transmission systems.

Exact classification of the wave-speed quotient, finite-element assembly of the
E/P/E and P/E chains, energy-exact time stepping and spectral diagnostics.
"""

__version__ = "0.1.0"

from .errors import PiezoStabError  # noqa: E402
from .params import MaterialParams, SystemConfig, Variant, load_config  # noqa: E402

__all__ = ["__version__", "PiezoStabError", "MaterialParams", "SystemConfig", "Variant", "load_config"]
