"""Units, physical constants and the two scalar kernels used everywhere.

Energies are carried internally in meV and times in ps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, DomainError

KB_EV_PER_K = 8.617333262e-5
HBAR_EV_FS = 0.6582119569
CM1_IN_EV = 1.239841984e-4

KB = KB_EV_PER_K * 1e3            # meV / K
HBAR = HBAR_EV_FS                 # meV * ps (same digits as eV * fs)

# meV per one unit of each supported energy unit
_MEV_PER_UNIT = {
    "meV": 1.0,
    "eV": 1e3,
    "cm-1": CM1_IN_EV * 1e3,
    "K": KB,
}
_ALIASES = {
    "mev": "meV", "ev": "eV", "cm1": "cm-1", "cm-1": "cm-1", "cm^-1": "cm-1",
    "cm⁻¹": "cm-1", "k": "K", "kelvin": "K",
}


def canonical_unit(unit: str) -> str:
    """Normalise a unit label, raising ConfigurationError if unknown."""
    if unit in _MEV_PER_UNIT:
        return unit
    try:
        return _ALIASES[unit.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown energy unit {unit!r}") from None


@dataclass(frozen=True)
class Energy:
    """An energy value tagged with its unit."""

    value: float
    unit: str = "meV"

    def __post_init__(self):
        object.__setattr__(self, "unit", canonical_unit(self.unit))

    def to(self, unit: str) -> "Energy":
        return convert_energy(self, unit)

    @property
    def meV(self) -> float:
        return self.value * _MEV_PER_UNIT[self.unit]


def convert_energy(x: Energy, target_unit: str) -> Energy:
    target = canonical_unit(target_unit)
    if target == x.unit:
        return Energy(x.value, target)
    return Energy(x.value * _MEV_PER_UNIT[x.unit] / _MEV_PER_UNIT[target], target)


def to_meV(value, unit: str):
    """Scale a bare number (or array) in `unit` to meV."""
    return value * _MEV_PER_UNIT[canonical_unit(unit)]


def from_meV(value, unit: str):
    return value / _MEV_PER_UNIT[canonical_unit(unit)]


def kT(T: float) -> float:
    """Thermal energy in meV."""
    if T < 0:
        raise DomainError(f"negative temperature {T} K")
    return KB * T


def bose_occupation(de, T: float):
    """Bose-Einstein occupation 1/(exp(de/kT) - 1) for a gap `de` in meV.

    Exactly zero at T = 0. Vectorised over `de`.
    """
    de_arr = np.asarray(de, dtype=float)
    if T < 0:
        raise DomainError(f"negative temperature {T} K")
    if T == 0:
        out = np.zeros_like(de_arr)
    else:
        if np.any(de_arr <= 0):
            raise DomainError("bose_occupation needs a positive energy gap when T > 0")
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(de_arr / (KB * T))
    return float(out) if np.ndim(de) == 0 else out


def poisson_weight(n, x):
    """Poisson weight x**n exp(-x) / n!, evaluated in log space."""
    n_arr = np.asarray(n)
    x_arr = np.asarray(x, dtype=float)
    if np.any(n_arr < 0) or np.any(x_arr < 0):
        raise DomainError("poisson_weight needs n >= 0 and x >= 0")
    n_arr, x_arr = np.broadcast_arrays(n_arr, x_arr)
    out = np.where(n_arr == 0, np.exp(-x_arr), 0.0)
    pos = (x_arr > 0) & (n_arr > 0)
    if np.any(pos):
        nn = n_arr[pos].astype(float)
        xx = x_arr[pos]
        out[pos] = np.exp(nn * np.log(xx) - xx - gammaln(nn + 1.0))
    if out.ndim == 0:
        return float(out)
    return out


def rate_to_per_ps(energy_meV):
    """Convert a rate quoted as hbar*gamma (meV) to 1/ps."""
    return energy_meV / HBAR


def ensure_temperature(T) -> float:
    T = float(T)
    if not math.isfinite(T) or T < 0:
        raise DomainError(f"temperature must be finite and >= 0, got {T}")
    return T
