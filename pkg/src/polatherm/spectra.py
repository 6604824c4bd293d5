"""Vibronic emission and absorption spectra of a disordered molecular film.

Three forward models share one machinery:

* the exact multimode model, a product of thermal and emission Poisson
  progressions per mode with Gaussian inhomogeneous broadening;
* the homogeneous (per-molecule) model, same progressions with Lorentzian
  lines whose width grows with the number of vibrational quanta involved;
* the reduced model, where low-frequency modes are folded into an
  effective 0-0 position and width.

All energies are in meV. Curves are normalised to unit area analytically,
i.e. by the total retained Poisson weight, so that the emission and
absorption of one system are exact mirror images about ``omega_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.special import erf

from .errors import ConfigurationError, DomainError, NumericError
from .units import bose_occupation, ensure_temperature, poisson_weight

SQRT2PI = math.sqrt(2.0 * math.pi)

TRUNCATION_EPS = 1e-8
MAX_QUANTA = 40
PRUNE_WEIGHT = 1e-12
GRID_HALF_WIDTH = 800.0   # meV
GRID_STEP = 0.5           # meV
GAUSSIAN_REGIME_FACTOR = 5.0


@dataclass(frozen=True)
class VibrationalMode:
    """One intramolecular vibration.

    ``omega_v`` and ``gamma_v`` in meV; ``huang_rhys_sq`` is the
    squared displacement entering the Poisson progression.
    """

    omega_v: float
    huang_rhys_sq: float
    gamma_v: float = 0.0

    def __post_init__(self):
        if not self.omega_v > 0:
            raise DomainError(f"vibrational frequency must be positive, got {self.omega_v}")
        if not (math.isfinite(self.huang_rhys_sq) and self.huang_rhys_sq >= 0):
            raise DomainError(f"Huang-Rhys factor must be finite and >= 0, got {self.huang_rhys_sq}")
        if self.gamma_v < 0:
            raise DomainError("vibrational damping must be >= 0")


@dataclass(frozen=True)
class MolecularSystem:
    """Dressed exciton plus its vibrational modes.

    ``omega_M`` separates low-frequency modes (``omega_v <= omega_M``) from
    high-frequency ones. When left as None the inhomogeneous width is used,
    which reproduces the rule omega_vM < Gamma < omega_vM+1.
    """

    omega_0: float
    gamma_inhom: float
    modes: tuple = ()
    omega_M: float | None = None
    gamma_diss: float = 0.0

    def __post_init__(self):
        if self.gamma_inhom < 0 or self.gamma_diss < 0:
            raise DomainError("linewidths must be >= 0")
        modes = tuple(sorted(self.modes, key=lambda m: m.omega_v))
        object.__setattr__(self, "modes", modes)
        if self.omega_M is None:
            object.__setattr__(self, "omega_M", float(self.gamma_inhom))
        if self.omega_M < 0:
            raise DomainError("cutoff omega_M must be >= 0")

    @property
    def low_modes(self) -> tuple:
        return tuple(m for m in self.modes if m.omega_v <= self.omega_M)

    @property
    def high_modes(self) -> tuple:
        return tuple(m for m in self.modes if m.omega_v > self.omega_M)

    def without_low_modes(self) -> "MolecularSystem":
        return MolecularSystem(self.omega_0, self.gamma_inhom, self.high_modes,
                               self.omega_M, self.gamma_diss)

    def check_gaussian_regime(self, factor: float = GAUSSIAN_REGIME_FACTOR):
        if self.gamma_inhom <= 0:
            raise DomainError("Gaussian lineshape needs a positive inhomogeneous width")
        if self.gamma_diss > 0 and self.gamma_inhom < factor * self.gamma_diss / 2:
            raise DomainError(
                f"inhomogeneous width {self.gamma_inhom} meV is not >> gamma_diss/2 "
                f"= {self.gamma_diss / 2} meV (factor {factor})")


@dataclass
class SpectralCurve:
    """Intensity (1/meV) sampled on a strictly increasing energy grid (meV)."""

    grid: np.ndarray
    intensity: np.ndarray
    kind: str
    temperature: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.kind not in ("emission", "absorption"):
            raise ConfigurationError(f"curve kind must be emission or absorption, got {self.kind!r}")
        if self.grid.shape != self.intensity.shape or self.grid.ndim != 1:
            raise ConfigurationError("grid and intensity must be 1-D and of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigurationError("spectral grid must be strictly increasing")

    def integral(self) -> float:
        return float(np.trapezoid(self.intensity, self.grid))


def default_grid(sys: MolecularSystem, half_width: float = GRID_HALF_WIDTH,
                 step: float = GRID_STEP) -> np.ndarray:
    n = int(round(half_width / step))
    return sys.omega_0 + step * np.arange(-n, n + 1)


def _weighted_reach(offsets, weights, lost: float = 1e-9) -> float:
    # largest |offset| still needed once a fraction `lost` of the weight may be dropped
    order = np.argsort(np.abs(offsets))
    cum = np.cumsum(weights[order]) / weights.sum()
    i = min(int(np.searchsorted(cum, 1.0 - lost)), offsets.size - 1)
    return float(np.abs(offsets[order[i]]))


def adequate_grid(sys: MolecularSystem, T: float, step: float = GRID_STEP,
                  tails: float = 8.0, model: str = "exact") -> np.ndarray:
    """Grid symmetric about omega_0 reaching ``tails`` widths past the outermost line.

    On such a grid every Gaussian-model curve integrates to one within 1e-6.
    """
    T = ensure_temperature(T)
    if model == "reduced":
        omega_em, _, sigma = effective_peak_params(sys, T)
        offsets, _, weights = _progression(sys.high_modes, T, eps=TRUNCATION_EPS,
                                           max_quanta=MAX_QUANTA, prune=PRUNE_WEIGHT, thermal=False)
        reach = _weighted_reach(offsets, weights) + sys.omega_0 - omega_em
    else:
        offsets, _, weights = _progression(sys.modes, T, eps=TRUNCATION_EPS, max_quanta=MAX_QUANTA,
                                           prune=PRUNE_WEIGHT)
        reach, sigma = _weighted_reach(offsets, weights), sys.gamma_inhom
    return default_grid(sys, half_width=step * math.ceil((reach + tails * sigma) / step), step=step)


# --- Poisson progressions -------------------------------------------------

def _quanta_cutoff(x: float, eps: float, max_quanta: int, mode: VibrationalMode) -> int:
    """Smallest K with sum_{k<=K} z_k(x) >= 1 - eps."""
    if x == 0:
        return 0
    ks = np.arange(max_quanta + 1)
    cum = np.cumsum(poisson_weight(ks, x))
    hit = np.nonzero(cum >= 1.0 - eps)[0]
    if hit.size == 0:
        raise NumericError(
            f"Poisson sum for mode omega_v={mode.omega_v:.4g} meV "
            f"(argument {x:.4g}) not converged within {max_quanta} quanta")
    return int(hit[0])


def _mode_terms(mode: VibrationalMode, n_v: float, eps: float, max_quanta: int):
    """Net quanta d = k - k', total quanta s = k + k' and weights for one mode."""
    x_em = (1.0 + n_v) * mode.huang_rhys_sq
    x_th = n_v * mode.huang_rhys_sq
    kk = np.arange(_quanta_cutoff(x_em, eps, max_quanta, mode) + 1)
    kp = np.arange(_quanta_cutoff(x_th, eps, max_quanta, mode) + 1)
    w = np.outer(poisson_weight(kp, x_th), poisson_weight(kk, x_em))
    d = kk[None, :] - kp[:, None]
    s = kk[None, :] + kp[:, None]
    return d.ravel(), s.ravel(), w.ravel()


def _continuous_mode_terms(mode: VibrationalMode, n_v: float, nodes: int = 801):
    """Same as `_mode_terms` with each Poisson sum replaced by a Gaussian
    integral over a continuous quantum number y >= 0 (variance = mean = x),
    renormalised for the truncation at y = 0."""
    x_em = (1.0 + n_v) * mode.huang_rhys_sq
    x_th = n_v * mode.huang_rhys_sq
    span = max(x_em, x_th) + 12.0 * math.sqrt(max(x_em, x_th, 1e-300))
    h = span / (nodes - 1)
    y = h * np.arange(nodes)

    def density(x):
        if x < 1e-12:
            p = np.zeros(nodes)
            p[0] = 1.0
            return p
        p = np.exp(-(y - x) ** 2 / (2 * x)) / math.sqrt(2 * math.pi * x)
        p *= 2.0 / (1.0 + erf(math.sqrt(x / 2.0))) * h
        p[0] *= 0.5
        return p

    p_em, p_th = density(x_em), density(x_th)
    # distribution of y_em - y_th on the lattice h * (i - j)
    w = np.convolve(p_em, p_th[::-1])
    d = h * (np.arange(w.size) - (nodes - 1))
    keep = w > 0
    return d[keep], np.zeros(keep.sum()), w[keep]


def _combine(term_lists, freqs, widths, prune: float):
    """Outer-combine per-mode (d, s, w) into offsets, extra widths, weights."""
    offsets = np.zeros(1)
    extra = np.zeros(1)
    weights = np.ones(1)
    for (d, s, w), om, gv in zip(term_lists, freqs, widths):
        offsets = (offsets[:, None] + om * d[None, :]).ravel()
        extra = (extra[:, None] + gv * s[None, :]).ravel()
        weights = (weights[:, None] * w[None, :]).ravel()
        keep = weights >= prune
        offsets, extra, weights = offsets[keep], extra[keep], weights[keep]
    return offsets, extra, weights


def _collapse(d, s, w):
    """Merge terms with equal net quanta; exact whenever the width ignores s."""
    ud, inv = np.unique(d, return_inverse=True)
    return ud, np.zeros(ud.size, dtype=s.dtype), np.bincount(inv, weights=w)


def _progression(modes: Sequence[VibrationalMode], T: float, *, eps: float,
                 max_quanta: int, prune: float, thermal: bool = True,
                 continuous: Sequence[bool] | None = None, collapse: bool = True):
    lists, freqs, widths = [], [], []
    continuous = continuous or [False] * len(modes)
    for mode, cont in zip(modes, continuous):
        n_v = bose_occupation(mode.omega_v, T) if thermal else 0.0
        if cont:
            lists.append(_continuous_mode_terms(mode, n_v))
        else:
            terms = _mode_terms(mode, n_v, eps, max_quanta)
            lists.append(_collapse(*terms) if collapse else terms)
        freqs.append(mode.omega_v)
        widths.append(mode.gamma_v)
    return _combine(lists, freqs, widths, prune)


# Gaussians are evaluated within this many widths of their centre; the
# neglected tail is below 1e-31 of the peak.
KERNEL_REACH = 12.0


@numba.njit(cache=True)
def _gauss_kernel(delta, shifts, weights, inv2s2, reach):
    out = np.zeros(delta.size)
    for t in range(shifts.size):
        c = shifts[t]
        w = weights[t]
        lo = np.searchsorted(delta, -c - reach)
        hi = np.searchsorted(delta, -c + reach, side="right")
        for i in range(lo, hi):
            a = delta[i] + c
            out[i] += w * math.exp(-a * a * inv2s2)
    return out


def _gaussian_sum(grid, center, offsets, weights, sigma, sign):
    """sum_t w_t N(grid; center - sign*offset_t, sigma) / sum_t w_t."""
    delta = np.ascontiguousarray(np.asarray(grid, dtype=float) - center)
    out = _gauss_kernel(delta, np.ascontiguousarray(sign * offsets, dtype=float),
                        np.ascontiguousarray(weights, dtype=float),
                        1.0 / (2.0 * sigma * sigma), KERNEL_REACH * sigma)
    return out / (weights.sum() * SQRT2PI * sigma)


def _lorentzian_sum(grid, center, offsets, hwhm, weights, sign, chunk=512):
    delta = np.asarray(grid, dtype=float) - center
    out = np.zeros_like(delta)
    for a in range(0, offsets.size, chunk):
        c = sign * offsets[a:a + chunk]
        g = hwhm[a:a + chunk]
        arg = delta[None, :] + c[:, None]
        out += weights[a:a + chunk] @ (g[:, None] / (arg * arg + g[:, None] ** 2))
    return out / (weights.sum() * math.pi)


def _curve(grid, intensity, kind, T, **meta) -> SpectralCurve:
    return SpectralCurve(np.asarray(grid, dtype=float).copy(), intensity, kind, T, meta)


# --- exact Gaussian model -------------------------------------------------

def _exact(sys, T, grid, sign, kind, eps, max_quanta, prune, low_mode_sums):
    T = ensure_temperature(T)
    sys.check_gaussian_regime()
    grid = default_grid(sys) if grid is None else np.asarray(grid, dtype=float)
    if low_mode_sums not in ("poisson", "integral"):
        raise ConfigurationError(f"low_mode_sums must be 'poisson' or 'integral', got {low_mode_sums!r}")
    cont = [low_mode_sums == "integral" and m.omega_v <= sys.omega_M for m in sys.modes]
    offsets, _, weights = _progression(sys.modes, T, eps=eps, max_quanta=max_quanta,
                                       prune=prune, continuous=cont)
    inten = _gaussian_sum(grid, sys.omega_0, offsets, weights, sys.gamma_inhom, sign)
    return _curve(grid, inten, kind, T, model="exact", n_terms=int(offsets.size))


def emission_exact(sys: MolecularSystem, T: float, grid=None, *, eps: float = TRUNCATION_EPS,
                   max_quanta: int = MAX_QUANTA, prune: float = PRUNE_WEIGHT,
                   low_mode_sums: str = "poisson") -> SpectralCurve:
    """Emission of the full multimode model with Gaussian disorder.

    Each term sits at ``omega_0 - sum_j omega_vj (k_j - k'_j)`` with weight
    ``prod_j z_k'(n_j L_j) z_k((1 + n_j) L_j)``. ``low_mode_sums='integral'``
    swaps the Poisson sums of low-frequency modes for their Gaussian-integral
    replacement (truncated at zero quanta).
    """
    return _exact(sys, T, grid, +1.0, "emission", eps, max_quanta, prune, low_mode_sums)


def absorption_exact(sys: MolecularSystem, T: float, grid=None, *, eps: float = TRUNCATION_EPS,
                     max_quanta: int = MAX_QUANTA, prune: float = PRUNE_WEIGHT,
                     low_mode_sums: str = "poisson") -> SpectralCurve:
    """Absorption counterpart of `emission_exact`: same terms, mirrored about omega_0."""
    return _exact(sys, T, grid, -1.0, "absorption", eps, max_quanta, prune, low_mode_sums)


# --- homogeneous Lorentzian model ----------------------------------------

def _homogeneous(sys, T, grid, sign, kind, eps, max_quanta, prune):
    T = ensure_temperature(T)
    grid = default_grid(sys) if grid is None else np.asarray(grid, dtype=float)
    offsets, extra, weights = _progression(sys.modes, T, eps=eps, max_quanta=max_quanta,
                                           prune=prune, collapse=False)
    hwhm = sys.gamma_diss / 2.0 + extra
    if np.any(hwhm <= 0):
        raise NumericError("zero total linewidth in homogeneous spectrum; set gamma_diss or gamma_v")
    inten = _lorentzian_sum(grid, sys.omega_0, offsets, hwhm, weights, sign)
    return _curve(grid, inten, kind, T, model="homogeneous", n_terms=int(offsets.size))


def emission_homogeneous(sys: MolecularSystem, T: float, grid=None, *,
                         eps: float = TRUNCATION_EPS, max_quanta: int = MAX_QUANTA,
                         prune: float = PRUNE_WEIGHT) -> SpectralCurve:
    """Single-molecule emission: Lorentzians of HWHM gamma_diss/2 + sum_j gamma_vj (k_j + k'_j)."""
    return _homogeneous(sys, T, grid, +1.0, "emission", eps, max_quanta, prune)


def absorption_homogeneous(sys: MolecularSystem, T: float, grid=None, *,
                           eps: float = TRUNCATION_EPS, max_quanta: int = MAX_QUANTA,
                           prune: float = PRUNE_WEIGHT) -> SpectralCurve:
    return _homogeneous(sys, T, grid, -1.0, "absorption", eps, max_quanta, prune)


# --- reduced model --------------------------------------------------------

def effective_peak_params(sys: MolecularSystem, T: float) -> tuple[float, float, float]:
    """0-0 emission/absorption positions and common width with low modes folded in.

    Returns ``(omega_em, omega_abs, gamma_em)`` in meV.
    """
    T = ensure_temperature(T)
    low = sys.low_modes
    shift = sum(m.huang_rhys_sq * m.omega_v for m in low)
    var = sys.gamma_inhom ** 2
    for m in low:
        var += m.huang_rhys_sq * m.omega_v ** 2 * (1.0 + 2.0 * bose_occupation(m.omega_v, T))
    omega_em = sys.omega_0 - shift
    return omega_em, 2.0 * sys.omega_0 - omega_em, math.sqrt(var)


def _reduced(sys, T, grid, sign, kind, eps, max_quanta, prune):
    T = ensure_temperature(T)
    sys.check_gaussian_regime()
    grid = default_grid(sys) if grid is None else np.asarray(grid, dtype=float)
    omega_em, _, gamma_em = effective_peak_params(sys, T)
    # high-frequency modes are taken as unoccupied
    offsets, _, weights = _progression(sys.high_modes, T, eps=eps, max_quanta=max_quanta,
                                       prune=prune, thermal=False)
    center = sys.omega_0 - sign * (sys.omega_0 - omega_em)
    inten = _gaussian_sum(grid, center, offsets, weights, gamma_em, sign)
    return _curve(grid, inten, kind, T, model="reduced", n_terms=int(offsets.size),
                  omega_peak=center, gamma_em=gamma_em)


def emission_reduced(sys: MolecularSystem, T: float, grid=None, *, eps: float = TRUNCATION_EPS,
                     max_quanta: int = MAX_QUANTA, prune: float = PRUNE_WEIGHT) -> SpectralCurve:
    """Emission with low-frequency modes absorbed into omega_em and Gamma_em."""
    return _reduced(sys, T, grid, +1.0, "emission", eps, max_quanta, prune)


def absorption_reduced(sys: MolecularSystem, T: float, grid=None, *, eps: float = TRUNCATION_EPS,
                       max_quanta: int = MAX_QUANTA, prune: float = PRUNE_WEIGHT) -> SpectralCurve:
    return _reduced(sys, T, grid, -1.0, "absorption", eps, max_quanta, prune)


MODELS = {
    "exact": (emission_exact, absorption_exact),
    "reduced": (emission_reduced, absorption_reduced),
    "homogeneous": (emission_homogeneous, absorption_homogeneous),
}


def spectrum_pair(sys: MolecularSystem, T: float, grid=None, model: str = "exact"):
    """Emission and absorption of one model at one temperature."""
    try:
        em, ab = MODELS[model]
    except KeyError:
        raise ConfigurationError(f"unknown spectral model {model!r}") from None
    return em(sys, T, grid), ab(sys, T, grid)
