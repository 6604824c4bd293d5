"""Lower/upper polariton kinematics of a planar microcavity.

Energies in meV, wavevectors in 1/um, areas in um^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class CavityConfig:
    """Bare cavity photon: ``omega_cav(k) = omega_cav0 + alpha_cav * k**2``."""

    omega_cav0: float
    alpha_cav: float
    area_S: float

    def __post_init__(self):
        if not self.alpha_cav > 0:
            raise DomainError(f"alpha_cav must be positive, got {self.alpha_cav}")
        if not self.area_S > 0:
            raise DomainError(f"cavity area must be positive, got {self.area_S}")

    def omega(self, k):
        return self.omega_cav0 + self.alpha_cav * np.square(k)


@dataclass(frozen=True)
class PolaritonSetup:
    """Cavity coupled to the dressed exciton ``omega_0`` with Rabi energy ``rabi``.

    Only negative detuning (``omega_cav0 < omega_0``) is supported.
    """

    cavity: CavityConfig
    omega_0: float
    rabi: float
    n_mol: float

    def __post_init__(self):
        if not self.rabi > 0:
            raise DomainError(f"Rabi energy must be positive, got {self.rabi}")
        if not self.n_mol > 0:
            raise DomainError(f"molecule count must be positive, got {self.n_mol}")
        if not self.cavity.omega_cav0 < self.omega_0:
            raise DomainError(
                f"negative detuning required: omega_cav0 = {self.cavity.omega_cav0} meV "
                f"is not below omega_0 = {self.omega_0} meV")

    @property
    def detuning(self) -> float:
        """Exciton minus cavity energy at k = 0 (positive here)."""
        return self.omega_0 - self.cavity.omega_cav0

    def with_(self, **changes) -> "PolaritonSetup":
        cav = {f: changes.pop(f) for f in ("omega_cav0", "alpha_cav", "area_S") if f in changes}
        cavity = CavityConfig(**{**self.cavity.__dict__, **cav})
        fields = {"cavity": cavity, "omega_0": self.omega_0, "rabi": self.rabi, "n_mol": self.n_mol}
        fields.update(changes)
        return PolaritonSetup(**fields)


def branch_energies(setup: PolaritonSetup, k):
    """Lower and upper polariton energies at wavevector magnitude ``k``."""
    wc = setup.cavity.omega(k)
    mean = 0.5 * (setup.omega_0 + wc)
    half = np.sqrt(0.25 * (setup.omega_0 - wc) ** 2 + setup.rabi ** 2)
    return mean - half, mean + half


def lower_branch(setup: PolaritonSetup, k):
    return branch_energies(setup, k)[0]


def hopfield_angle(setup: PolaritonSetup, k):
    """Mixing angle in (0, pi/2); the lower branch is excitonic with weight sin^2."""
    return 0.5 * np.arctan2(2.0 * setup.rabi, setup.omega_0 - setup.cavity.omega(k))


def exciton_fraction(setup: PolaritonSetup, k):
    return np.sin(hopfield_angle(setup, k)) ** 2


def alpha_pol(setup: PolaritonSetup) -> float:
    """Curvature of the lower branch at k = 0: ``omega_low ~ omega_low(0) + alpha_pol k^2``."""
    d = setup.detuning
    return 0.5 * setup.cavity.alpha_cav * (1.0 + d / math.hypot(d, 2.0 * setup.rabi))


def delta_omega_min(setup: PolaritonSetup) -> float:
    """Level spacing next to k = 0 in a box of area S: ``4 pi alpha_pol / S``."""
    return 4.0 * math.pi * alpha_pol(setup) / setup.cavity.area_S


def delta_k(area_S: float) -> float:
    """Wavevector of the first excited in-plane state, ``sqrt(4 pi / S)``."""
    return math.sqrt(4.0 * math.pi / area_S)


def n_states(k_max: float, area_S: float) -> float:
    """Number of in-plane states with ``|k| < k_max``: ``pi k_max^2 S / (2 pi)^2``."""
    return math.pi * k_max ** 2 * area_S / (2.0 * math.pi) ** 2


def k_for_delta_omega(setup: PolaritonSetup, d_omega: float) -> float:
    """Wavevector whose lower-branch energy lies ``d_omega`` above k = 0."""
    if d_omega < 0:
        raise DomainError("energy offset must be >= 0")
    w0 = float(lower_branch(setup, 0.0))
    target = w0 + d_omega
    if target >= setup.omega_0:
        raise DomainError(f"lower branch never reaches {d_omega} meV above its minimum")
    # invert omega_low = target for the cavity energy, then the dispersion
    wc = target + setup.rabi ** 2 / (setup.omega_0 - target)
    return math.sqrt(max(wc - setup.cavity.omega_cav0, 0.0) / setup.cavity.alpha_cav)


def cavity_for_ground_state(omega_0: float, rabi: float, omega_low0: float) -> float:
    """Cavity energy at k = 0 that puts the lower branch minimum at ``omega_low0``."""
    if not omega_low0 < omega_0:
        raise DomainError(f"lower branch {omega_low0} meV must lie below the exciton {omega_0} meV")
    return omega_low0 + rabi ** 2 / (omega_0 - omega_low0)
