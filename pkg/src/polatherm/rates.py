"""Polariton thermalization rates driven by low-frequency molecular vibrations.

A polariton hops between lower-branch states k (higher) and k' (lower) by
emitting or absorbing a vibration of energy ``dw = w_low(k) - w_low(k')``::

    gamma_down = 2 pi sin^2(phi_k' - phi_k) (Omega_R^2 / N_mol) J(dw) (1 + n(dw))
    gamma_up   = same with n(dw)

where ``J = Lambda^2 nu`` is the vibrational spectral density of the film.
All rates are returned as energies (hbar * gamma, meV); `units.rate_to_per_ps`
converts them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError
from .extraction import LowFreqNet
from .polariton import (PolaritonSetup, alpha_pol, cavity_for_ground_state, delta_omega_min,
                        hopfield_angle, k_for_delta_omega, lower_branch)
from .units import bose_occupation, ensure_temperature, kT

VARIANTS = ("flat_A1", "flat_A2", "discrete_modes", "tabulated")
# relative slack on the finite-size spacing test
_SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class SpectralDensityModel:
    """Spectral density ``J(w) = Lambda^2(w) nu(w)`` on ``(0, omega_M]``.

    Variants
    --------
    flat_A1
        ``w J(w) = A1 / omega_M``.
    flat_A2
        ``w^2 J(w) = A2 / omega_M``.
    discrete_modes
        ``sum_j L_j N(w; w_j, width_j)`` from ``modes = ((w_j, L_j, width_j), ...)``.
    tabulated
        Linear interpolation of ``table = ((w, J), ...)``; zero outside.
    """

    variant: str
    net: LowFreqNet
    modes: tuple = ()
    table: tuple = ()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown spectral density variant {self.variant!r}")
        if self.variant == "discrete_modes":
            if not self.modes:
                raise ConfigurationError("discrete_modes needs a mode list")
            for w, lam, width in self.modes:
                if w <= 0 or lam < 0 or width <= 0:
                    raise DomainError(f"invalid mode ({w}, {lam}, {width})")
        if self.variant == "tabulated":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise ConfigurationError("tabulated density needs (w, J) pairs")
            if np.any(np.diff(tab[:, 0]) <= 0) or np.any(tab[:, 1] < 0):
                raise DomainError("tabulated density needs increasing w and J >= 0")

    @property
    def omega_M(self) -> float:
        return self.net.omega_M

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        inband = (w > 0) & (w <= self.omega_M)
        safe = np.where(inband, w, 1.0)
        if self.variant == "flat_A1":
            j = self.net.A1 / (self.omega_M * safe)
        elif self.variant == "flat_A2":
            j = self.net.A2 / (self.omega_M * safe ** 2)
        elif self.variant == "discrete_modes":
            j = np.zeros_like(safe)
            for w0, lam, width in self.modes:
                j = j + lam * np.exp(-0.5 * ((safe - w0) / width) ** 2) / (math.sqrt(2 * math.pi) * width)
        else:
            tab = np.asarray(self.table, dtype=float)
            j = np.interp(safe, tab[:, 0], tab[:, 1], left=0.0, right=0.0)
        out = np.where(inband, j, 0.0)
        return out if out.ndim else float(out)

    def realized_moments(self) -> tuple[float, float]:
        """``(A1, A2)`` actually carried by this density (inf if divergent)."""
        wm = self.omega_M
        if self.variant == "flat_A1":
            return self.net.A1, self.net.A1 * wm / 2.0
        if self.variant == "flat_A2":
            return math.inf, self.net.A2
        pts = None
        if self.variant == "discrete_modes":
            pts = [w for w, _, _ in self.modes if 0 < w < wm] or None
        elif self.variant == "tabulated":
            pts = [w for w, _ in self.table if 0 < w < wm] or None
        a1 = quad(lambda w: w * self(w), 0.0, wm, points=pts, limit=200)[0]
        a2 = quad(lambda w: w * w * self(w), 0.0, wm, points=pts, limit=200)[0]
        return a1, a2


def flat_density(net: LowFreqNet, T: float | None = None) -> SpectralDensityModel:
    """Default density: flat A1 when kT >> omega_M, flat A2 otherwise."""
    if T is not None and kT(T) >= 3.0 * net.omega_M:
        return SpectralDensityModel("flat_A1", net)
    return SpectralDensityModel("flat_A2", net)


@dataclass(frozen=True)
class RatePair:
    """Downhill (vibration emitted) and uphill (vibration absorbed) rates, meV."""

    gamma_down: float
    gamma_up: float
    delta_omega: float = math.nan
    out_of_band: bool = False
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class MixingFactor:
    exact: float
    approx: float

    @property
    def ratio(self) -> float:
        return self.approx / self.exact if self.exact > 0 else (1.0 if self.approx == 0 else math.inf)


def _mixing_prefactor(setup: PolaritonSetup) -> float:
    """``alpha_cav^2 / (alpha_pol^2 ((w_exc - w_cav)^2 + 4 Omega^2)^2)`` (1/meV^4)."""
    d = setup.detuning
    return setup.cavity.alpha_cav ** 2 / (alpha_pol(setup) ** 2 * (d * d + 4.0 * setup.rabi ** 2) ** 2)


def sin2_mixing(setup: PolaritonSetup, k: float, k_prime: float) -> MixingFactor:
    """Exact ``sin^2(phi_k' - phi_k)`` and its small-offset expansion."""
    exact = math.sin(float(hopfield_angle(setup, k_prime) - hopfield_angle(setup, k))) ** 2
    dw = abs(float(lower_branch(setup, k) - lower_branch(setup, k_prime)))
    approx = _mixing_prefactor(setup) * setup.rabi ** 2 * dw ** 2
    return MixingFactor(exact, approx)


def therm_rate_pair(setup: PolaritonSetup, sd: SpectralDensityModel, k: float, k_prime: float,
                    T: float, mixing: str = "exact", check_spacing: bool = True) -> RatePair:
    """Rates between lower-branch states ``k`` (upper) and ``k_prime`` (lower).

    Parameters
    ----------
    mixing : {"exact", "approx"}
        Hopfield factor from the mixing angles or from its quadratic expansion.
    check_spacing : bool
        Reject pairs closer than ``delta_omega_min``. Coarse mode grids that
        lump many states together switch this off.

    Raises
    ------
    DomainError
        If ``w_low(k) <= w_low(k')`` or the spacing is below ``delta_omega_min``.
    """
    T = ensure_temperature(T)
    dw = float(lower_branch(setup, k) - lower_branch(setup, k_prime))
    if dw <= 0:
        raise DomainError("state k must lie above state k' on the lower branch")
    dmin = delta_omega_min(setup)
    if check_spacing and dw < dmin * (1.0 - _SPACING_RTOL):
        raise DomainError(
            f"spacing {dw:.4g} meV is below the finite-size minimum {dmin:.4g} meV")
    if dw > sd.omega_M:
        return RatePair(0.0, 0.0, dw, True)
    mix = sin2_mixing(setup, k, k_prime)
    if mixing == "exact":
        s2 = mix.exact
    elif mixing == "approx":
        s2 = mix.approx
    else:
        raise ConfigurationError(f"mixing must be 'exact' or 'approx', got {mixing!r}")
    base = 2.0 * math.pi * s2 * setup.rabi ** 2 / setup.n_mol * float(sd(dw))
    n = float(bose_occupation(dw, T))
    return RatePair(base * (1.0 + n), base * n, dw, False, {"sin2": s2, "n_v": n})


def high_T_pair_estimate(setup: PolaritonSetup, sd: SpectralDensityModel, d_omega: float,
                         T: float) -> float:
    """Per-pair rate with ``n ~ kT / dw`` and the expanded Hopfield factor."""
    pref = 2.0 * math.pi * _mixing_prefactor(setup) * setup.rabi ** 4 / setup.n_mol
    return pref * d_omega * float(sd(d_omega)) * kT(T)


def high_T_average(setup: PolaritonSetup, net: LowFreqNet, T: float) -> float:
    """Pair rate averaged over spacings in ``(0, omega_M]`` with ``w J = A1 / omega_M``."""
    pref = 2.0 * math.pi * _mixing_prefactor(setup) * setup.rabi ** 4 / setup.n_mol
    return pref * net.A1 * kT(T) / net.omega_M


def high_T_estimate(setup: PolaritonSetup, net: LowFreqNet, T: float, form: str = "closed") -> float:
    """Nearest-neighbour rate at ``kT >> omega_M`` (meV).

    ``form="closed"`` evaluates the closed expression
    ``C Omega^4 (A1 / N) S kT / alpha_pol``. ``form="chain"`` rescales the
    spacing average by ``omega_M / delta_omega_min``, which carries an extra
    factor 1/2 relative to the closed expression.
    """
    T = ensure_temperature(T)
    if kT(T) < 3.0 * net.omega_M:
        warnings.warn(f"kT = {kT(T):.3g} meV is not >> omega_M = {net.omega_M:.3g} meV",
                      RuntimeWarning, stacklevel=2)
    if form == "closed":
        return (_mixing_prefactor(setup) * setup.rabi ** 4 * net.A1 / setup.n_mol
                * setup.cavity.area_S * kT(T) / alpha_pol(setup))
    if form == "chain":
        return net.omega_M / delta_omega_min(setup) * high_T_average(setup, net, T)
    raise ConfigurationError(f"form must be 'closed' or 'chain', got {form!r}")


def low_T_estimates(setup: PolaritonSetup, net: LowFreqNet, d_omega: float, T: float) -> RatePair:
    """Rates with ``w^2 J = A2 / omega_M`` and the expanded Hopfield factor."""
    T = ensure_temperature(T)
    base = (2.0 * math.pi * _mixing_prefactor(setup) * setup.rabi ** 4
            * net.A2 / (setup.n_mol * net.omega_M))
    n = float(bose_occupation(d_omega, T))
    return RatePair(base * (1.0 + n), base * n, d_omega, False, {"n_v": n})


def nearest_neighbour_rate(setup: PolaritonSetup, net: LowFreqNet, T: float,
                           method: str = "low_T", direction: str = "up") -> float:
    """Rate between k = 0 and the next state, ``delta_omega_min`` above it."""
    dmin = delta_omega_min(setup)
    if method == "low_T":
        pair = low_T_estimates(setup, net, dmin, T)
    elif method == "high_T":
        return high_T_estimate(setup, net, T)
    elif method in ("flat_A1", "flat_A2"):
        sd = SpectralDensityModel(method, net)
        pair = therm_rate_pair(setup, sd, k_for_delta_omega(setup, dmin), 0.0, T)
    else:
        raise ConfigurationError(f"unknown rate method {method!r}")
    if direction == "up":
        return pair.gamma_up
    if direction == "down":
        return pair.gamma_down
    raise ConfigurationError(f"direction must be 'up' or 'down', got {direction!r}")


def rate_map(template: PolaritonSetup, net: LowFreqNet, rabi_values, omega_low0_values,
             T: float, method: str = "low_T", direction: str = "up") -> np.ndarray:
    """Nearest-neighbour rate on a (omega_low0, Omega_R) grid.

    Row ``i`` corresponds to ``omega_low0_values[i]`` and column ``j`` to
    ``rabi_values[j]``. The cavity energy of every point is chosen so that the
    lower branch bottoms out at the requested ``omega_low0``.
    """
    rabi_values = np.asarray(rabi_values, dtype=float)
    omega_low0_values = np.asarray(omega_low0_values, dtype=float)
    out = np.empty((omega_low0_values.size, rabi_values.size))
    for i, w0 in enumerate(omega_low0_values):
        if w0 >= template.omega_0:
            raise DomainError(f"omega_low0 = {w0} meV is not below the exciton {template.omega_0} meV")
        for j, rabi in enumerate(rabi_values):
            wc = cavity_for_ground_state(template.omega_0, rabi, w0)
            setup = template.with_(omega_cav0=wc, rabi=rabi)
            out[i, j] = nearest_neighbour_rate(setup, net, T, method, direction)
    return out


@dataclass(frozen=True)
class RateVsTemperature:
    """Rates from k' = 0 to each k (rows) at each T (columns)."""

    k: np.ndarray
    T: np.ndarray
    delta_omega: np.ndarray
    gamma_up: np.ndarray
    gamma_down: np.ndarray
    gamma_nearest: np.ndarray

    def thermalization_length(self) -> np.ndarray:
        """Per temperature, number of grid states whose uphill rate is within
        1/e of the nearest-neighbour uphill rate."""
        up = np.nan_to_num(self.gamma_up, nan=0.0)
        ref = self.gamma_nearest
        return np.sum(up >= ref[None, :] / math.e, axis=0) * (ref > 0)


def rate_vs_temperature(setup: PolaritonSetup, net: LowFreqNet, k_grid, T_grid,
                        method: str = "low_T") -> RateVsTemperature:
    """Rates between the ground state and each ``k`` over a temperature grid.

    ``method="low_T"`` uses the A2 estimate; ``"flat_A1"``, ``"flat_A2"`` use
    the full pair expression with that density. States closer to k = 0 than
    the finite-size spacing are reported as NaN.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    T_grid = np.asarray(T_grid, dtype=float)
    w0 = float(lower_branch(setup, 0.0))
    dw = lower_branch(setup, k_grid) - w0
    up = np.full((k_grid.size, T_grid.size), np.nan)
    down = np.full_like(up, np.nan)
    dmin = delta_omega_min(setup)
    sd = SpectralDensityModel(method, net) if method in ("flat_A1", "flat_A2") else None
    for i, (k, d) in enumerate(zip(k_grid, dw)):
        if d < dmin * (1.0 - _SPACING_RTOL):
            continue
        for j, T in enumerate(T_grid):
            if sd is None:
                pair = low_T_estimates(setup, net, d, T) if d <= net.omega_M else RatePair(0.0, 0.0)
            else:
                pair = therm_rate_pair(setup, sd, k, 0.0, T)
            up[i, j], down[i, j] = pair.gamma_up, pair.gamma_down
    nearest = np.array([nearest_neighbour_rate(setup, net, T, "low_T" if sd is None else method)
                        for T in T_grid])
    return RateVsTemperature(k_grid, T_grid, dw, up, down, nearest)
