"""Space-time fractional heat equation on an interval via the extension method."""

from fracheat.spectral import FractionalParams, SpectralData, TimeProfile

__all__ = ["FractionalParams", "SpectralData", "TimeProfile"]
__version__ = "0.1.0"
