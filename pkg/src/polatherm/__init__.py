"""Vibronic spectra, polariton thermalization rates and condensation kinetics.

Energies are in meV, times in ps, wavevectors in 1/um and temperatures in K
throughout; `polatherm.units` converts to and from other units.
"""
from .errors import (ConfigurationError, DomainError, ExtractionError, IntegrationError,
                     NumericError, PolathermError, SearchError)

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "DomainError", "ExtractionError", "IntegrationError",
           "NumericError", "PolathermError", "SearchError", "__version__"]
