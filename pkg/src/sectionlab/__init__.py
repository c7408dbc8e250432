"""Tools for partial sums of power, Dirichlet, Bessel and Kapteyn series:
asymptotic growth measurement, zero location, and phase portraits."""

from .bessel import (AsymptoticParams, LogComplex, bessel_j, bessel_j_derivative,
                     bessel_j_scaled, carlini_meissel, wrap_phase)
from .geometry import WindowBox

__all__ = [
    "AsymptoticParams",
    "LogComplex",
    "WindowBox",
    "bessel_j",
    "bessel_j_derivative",
    "bessel_j_scaled",
    "carlini_meissel",
    "wrap_phase",
]

__version__ = "0.1.0"
