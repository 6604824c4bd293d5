"""Recover the net low-frequency parameters from emission/absorption spectra.

The pipeline fits the 0-0 feature of every curve in a temperature series,
takes the Stokes shift from the fitted centres and the 0-0 variance from the
fitted widths, then

* ``A1`` is half the mean Stokes shift,
* ``Gamma**2`` is the intercept of the high-temperature variance law,
* ``A2`` is the low-temperature variance plateau minus ``Gamma**2``.

Three peak models are offered:

``"gaussian"``
    plain windowed Gaussian fit;
``"skewed"``
    Gaussian with a third-cumulant (Gram-Charlier) term in a window that stops
    one width into the replica side of the 0-0 peak. Suited to exact
    multimode spectra, whose 0-0 band is skewed by the low-mode progression
    and overlapped by high-frequency replicas;
``"progression"``
    one band shape (four cumulants) plus three shifted, scaled copies of it
    standing for the high-frequency replicas, fitted over seven widths on the
    replica side. Well posed only while the first replica is resolved, i.e.
    at low temperature, where it gives the most accurate 0-0 variance.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .errors import ExtractionError
from .spectra import SpectralCurve
from .units import kT

MAX_ITERATIONS = 200
MAX_RESIDUAL = 0.05
SIGNIFICANCE = 0.10
SLOPE_TOLERANCE = 0.10

# window half-widths, in units of the width estimate, (replica side, open side)
_WINDOWS = {"gaussian": (3.0, 3.0), "skewed": (1.0, 4.0), "progression": (7.0, 4.0)}
N_COPIES = 3


@dataclass(frozen=True)
class PeakFit:
    """Result of a 0-0 peak fit; energies in meV.

    ``residual_rms`` is the rms misfit over the window relative to the fitted
    amplitude. ``skew`` is the Gram-Charlier third-cumulant coefficient (zero
    for the plain Gaussian model).
    """

    center: float
    sigma: float
    amplitude: float
    residual_rms: float
    skew: float = 0.0
    window: tuple = (math.nan, math.nan)


@dataclass(frozen=True)
class LowFreqNet:
    """Net low-frequency vibration parameters.

    Attributes
    ----------
    gamma_inhom : float
        Inhomogeneous width Gamma (meV).
    A1 : float
        First moment of the vibrational spectral density (meV).
    A2 : float
        Second moment (meV^2).
    omega_M : float
        Upper edge of the low-frequency band (meV).
    """

    gamma_inhom: float
    A1: float
    A2: float
    omega_M: float

    def __post_init__(self):
        for name in ("gamma_inhom", "A1", "A2", "omega_M"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ExtractionError(f"{name} must be finite and non-negative, got {v}")

    def to_text(self) -> str:
        return (f"gamma_inhom_meV = {self.gamma_inhom:.10g}\n"
                f"A1_meV = {self.A1:.10g}\n"
                f"A2_meV2 = {self.A2:.10g}\n"
                f"omega_M_meV = {self.omega_M:.10g}\n")

    @classmethod
    def from_text(cls, text: str) -> "LowFreqNet":
        keys = {"gamma_inhom_meV": "gamma_inhom", "A1_meV": "A1",
                "A2_meV2": "A2", "omega_M_meV": "omega_M"}
        vals = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in keys:
                raise ExtractionError(f"line {lineno}: expected one of {sorted(keys)} = value")
            vals[keys[key]] = float(value)
        missing = set(keys.values()) - set(vals)
        if missing:
            raise ExtractionError(f"missing keys: {sorted(missing)}")
        return cls(**vals)


@dataclass(frozen=True)
class SeriesPoint:
    """Per-temperature fit results."""

    T: float
    emission: PeakFit
    absorption: PeakFit

    @property
    def stokes(self) -> float:
        return self.absorption.center - self.emission.center

    @property
    def variance(self) -> float:
        return self.emission.sigma ** 2


@dataclass(frozen=True)
class NetExtraction:
    """Full record of an `extract_net` run."""

    net: LowFreqNet
    points: tuple
    slope: float
    mean_stokes: float
    curvature: float
    plateau: float
    high_T: tuple
    warnings: tuple = field(default=())


# --- 0-0 peak fitting -------------------------------------------------------

def _orientation(curve: SpectralCurve) -> float:
    # +1: replicas lie below the 0-0 peak (emission); -1: above (absorption)
    return 1.0 if curve.kind == "emission" else -1.0


def locate_00_peak(curve: SpectralCurve, significance: float = SIGNIFICANCE) -> tuple[float, float]:
    """Position and width estimate of the 0-0 maximum.

    The 0-0 peak is the highest-energy significant maximum of an emission curve
    and the lowest-energy one of an absorption curve. The width estimate is the
    half width at half maximum on the open (replica-free) side over sqrt(2 ln 2).
    """
    y = curve.intensity
    if y.size < 3 or not np.any(y > 0):
        raise ExtractionError("curve has no positive intensity")
    peaks, _ = find_peaks(y, height=significance * y.max())
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(y))])
    sign = _orientation(curve)
    i = int(peaks[-1] if sign > 0 else peaks[0])
    half = 0.5 * y[i]
    step = 1 if sign > 0 else -1
    j = i
    while 0 <= j + step < y.size and y[j + step] > half:
        j += step
    if not 0 <= j + step < y.size:
        raise ExtractionError("0-0 peak runs into the edge of the grid")
    # linear interpolation of the half-maximum crossing
    x0, x1, y0, y1 = curve.grid[j], curve.grid[j + step], y[j], y[j + step]
    xh = x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    hwhm = abs(xh - curve.grid[i])
    return float(curve.grid[i]), float(hwhm / math.sqrt(2.0 * math.log(2.0)))


def _band(u, k3, k4=0.0):
    u2 = u * u
    return np.exp(-0.5 * u2) * (1.0 + k3 / 6.0 * (u2 * u - 3.0 * u)
                                + k4 / 24.0 * (u2 * u2 - 6.0 * u2 + 3.0))


def _replica_seed(curve: SpectralCurve, c0: float, s0: float) -> float:
    """Offset (signed, towards the replicas) of the first resolved replica."""
    y = curve.intensity
    peaks, _ = find_peaks(y, height=SIGNIFICANCE * y.max())
    sign = _orientation(curve)
    pos = curve.grid[peaks]
    side = pos[sign * (c0 - pos) > 1.5 * s0]
    if side.size == 0:
        raise ExtractionError("progression model needs a resolved vibronic replica")
    return float(side[np.argmin(np.abs(side - c0))] - c0)


def _initial(model, c0, s0, curve):
    if model == "gaussian":
        return [1.0, c0, s0], [0.0, -np.inf, 1e-6 * s0], [np.inf, np.inf, np.inf]
    if model == "skewed":
        return [1.0, c0, s0, 0.0], [0.0, -np.inf, 1e-6 * s0, -3.0], [np.inf, np.inf, np.inf, 3.0]
    rep = _replica_seed(curve, c0, s0)
    p0 = [1.0, c0, s0, 0.0, 0.0]
    lo = [0.0, -np.inf, 1e-6 * s0, -3.0, -3.0]
    hi = [np.inf, np.inf, np.inf, 3.0, 3.0]
    # copies straddling the first replica plus one at the second order
    for shift in (rep + 0.4 * s0 * np.sign(rep), rep - 0.4 * s0 * np.sign(rep), 2.0 * rep)[:N_COPIES]:
        p0 += [0.3, shift]
        lo += [0.0, -np.inf]
        hi += [np.inf, np.inf]
    return p0, lo, hi


def _evaluate(model, p, x):
    u = (x - p[1]) / p[2]
    if model == "gaussian":
        return p[0] * _band(u, 0.0)
    if model == "skewed":
        return p[0] * _band(u, p[3])
    out = _band(u, p[3], p[4])
    for amp, shift in zip(p[5::2], p[6::2]):
        out = out + amp * _band(u - shift / p[2], p[3], p[4])
    return p[0] * out


def fit_00_peak(curve: SpectralCurve, window: Sequence[float] | None = None,
                model: str = "gaussian", max_iterations: int = MAX_ITERATIONS,
                max_residual: float = MAX_RESIDUAL) -> PeakFit:
    """Least-squares fit of the 0-0 feature of one spectrum.

    Parameters
    ----------
    curve : SpectralCurve
        Emission or absorption spectrum.
    window : (lo, hi), optional
        Energy interval in meV. By default it is built around the located 0-0
        peak: +-3 widths for ``"gaussian"``, one width towards the replicas
        and four on the open side for ``"skewed"``, seven and four for
        ``"progression"``.
    model : {"gaussian", "skewed", "progression"}
    max_iterations : int
        Cap on solver iterations.
    max_residual : float
        Largest accepted rms misfit relative to the amplitude.

    Returns
    -------
    PeakFit
        ``sigma`` is the standard deviation of the fitted 0-0 band; the
        cumulant terms leave it unchanged.

    Raises
    ------
    ExtractionError
        If the solver does not converge, the window holds too few points or
        the misfit exceeds ``max_residual``.
    """
    if model not in _WINDOWS:
        raise ExtractionError(f"unknown peak model {model!r}")
    c0, s0 = locate_00_peak(curve)
    if window is None:
        inner, outer = _WINDOWS[model]
        if _orientation(curve) > 0:
            window = (c0 - inner * s0, c0 + outer * s0)
        else:
            window = (c0 - outer * s0, c0 + inner * s0)
    lo, hi = float(min(window)), float(max(window))
    m = (curve.grid >= lo) & (curve.grid <= hi)
    x, y = curve.grid[m], curve.intensity[m]
    p0, lower, upper = _initial(model, c0, s0, curve)
    if x.size < 2 * len(p0):
        raise ExtractionError(f"fit window [{lo:.4g}, {hi:.4g}] meV holds only {x.size} points")
    scale = float(y.max())
    if scale <= 0:
        raise ExtractionError("no signal inside the fit window")
    try:
        res = least_squares(lambda p: _evaluate(model, p, x) - y / scale, p0,
                            bounds=(lower, upper), x_scale="jac",
                            max_nfev=max_iterations * (len(p0) + 1))
    except ValueError as exc:
        raise ExtractionError(f"0-0 fit failed: {exc}") from None
    if res.status <= 0:
        raise ExtractionError(f"0-0 fit did not converge in {max_iterations} iterations")
    amp, center, sigma = res.x[:3]
    rms = float(np.sqrt(np.mean(res.fun ** 2)) / amp) if amp > 0 else math.inf
    if rms > max_residual:
        raise ExtractionError(
            f"0-0 fit residual {rms:.3g} exceeds {max_residual:.3g}; the window "
            f"[{lo:.4g}, {hi:.4g}] meV likely contains more than one feature")
    skew = float(res.x[3]) if model != "gaussian" else 0.0
    return PeakFit(float(center), float(sigma), float(amp * scale), rms, skew, (lo, hi))


def stokes_shift(em: SpectralCurve, ab: SpectralCurve, model: str = "gaussian") -> float:
    """Absorption minus emission 0-0 centre (meV)."""
    if em.kind != "emission" or ab.kind != "absorption":
        raise ExtractionError("stokes_shift needs an emission and an absorption curve")
    if not math.isclose(em.temperature, ab.temperature, rel_tol=1e-9, abs_tol=1e-9):
        raise ExtractionError("emission and absorption were taken at different temperatures")
    return fit_00_peak(ab, model=model).center - fit_00_peak(em, model=model).center


# --- net parameters -------------------------------------------------------

def fit_series(series: Iterable, model: str = "gaussian") -> tuple:
    """Fit emission and absorption 0-0 peaks of every (T, em, abs) entry."""
    out = []
    for T, em, ab in series:
        if em.kind != "emission" or ab.kind != "absorption":
            raise ExtractionError(f"T = {T} K: expected (emission, absorption) curves")
        out.append(SeriesPoint(float(T), fit_00_peak(em, model=model), fit_00_peak(ab, model=model)))
    return tuple(sorted(out, key=lambda p: p.T))


def extract_net(series: Iterable, omega_M: float, model: str = "gaussian",
                plateau_model: str | None = None, curvature: bool = False,
                detailed: bool = False):
    """Net parameters (Gamma, A1, A2) from a temperature series of spectra.

    Parameters
    ----------
    series : iterable of (T, emission, absorption)
    omega_M : float
        Upper edge of the low-frequency band (meV). Points with
        ``kT >= omega_M`` form the high-temperature subset (at least three
        required); at least one point must have ``kT <= omega_M / 4``.
    model : {"gaussian", "skewed", "progression"}
        0-0 peak model passed to `fit_00_peak` for every curve.
    plateau_model : str, optional
        Peak model used again on the lowest-temperature emission curve for
        the variance plateau entering A2. ``"progression"`` suits exact
        spectra, whose replicas are resolved at low temperature.
    curvature : bool
        Regress the variance on ``[1, kT, 1/kT]`` instead of ``[1, kT]``. The
        extra term is the next order of ``coth(w / 2kT)`` and removes the
        intercept bias of the bare linear law at ``kT ~ omega_M``. Only useful
        when the fitted widths are accurate to a few meV^2.
    detailed : bool
        Return a `NetExtraction` record instead of the bare `LowFreqNet`.

    Raises
    ------
    ExtractionError
        Insufficient temperature coverage or a negative A2.
    """
    series = list(series)
    points = fit_series(series, model=model)
    if not points:
        raise ExtractionError("empty spectral series")
    energies = np.array([kT(p.T) for p in points])
    high = energies >= omega_M
    if high.sum() < 3 or not np.any(energies <= omega_M / 4.0):
        raise ExtractionError(
            f"temperature coverage insufficient: need >= 3 points with kT >= {omega_M:.4g} meV "
            f"(have {int(high.sum())}) and one with kT <= {omega_M / 4:.4g} meV")

    stokes = np.array([p.stokes for p in points])
    mean_stokes = float(stokes.mean())
    x = energies[high]
    y = np.array([p.variance for p in points])[high]
    cols = [np.ones_like(x), x] + ([1.0 / x] if curvature else [])
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    gamma2, slope = float(coef[0]), float(coef[1])
    curv = float(coef[2]) if curvature else 0.0

    notes = []
    scale = max(abs(mean_stokes), 1e-9 * max(abs(slope), 1.0))
    if abs(slope - mean_stokes) > SLOPE_TOLERANCE * scale and abs(slope - mean_stokes) > 1e-6:
        msg = (f"high-T slope {slope:.4g} meV deviates from the Stokes shift "
               f"{mean_stokes:.4g} meV by more than {SLOPE_TOLERANCE:.0%}")
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    i_low = int(np.argmin(energies))
    plateau = points[i_low].variance
    if plateau_model is not None and plateau_model != model:
        coldest = min(series, key=lambda entry: entry[0])
        plateau = fit_00_peak(coldest[1], model=plateau_model).sigma ** 2
    a2 = plateau - gamma2
    # residual noise of order 1e-9 * Gamma^2 is accepted as zero
    tol = 1e-9 * max(gamma2, 1.0)
    if a2 < -tol:
        raise ExtractionError(f"negative A2 = {a2:.4g} meV^2: inconsistent spectra")
    if gamma2 < 0:
        raise ExtractionError(f"negative Gamma^2 intercept {gamma2:.4g} meV^2")
    a1 = mean_stokes / 2.0
    if a1 < -1e-6:
        raise ExtractionError(f"negative Stokes shift {mean_stokes:.4g} meV")
    net = LowFreqNet(math.sqrt(gamma2), max(a1, 0.0), max(a2, 0.0), float(omega_M))
    if not detailed:
        return net
    return NetExtraction(net, points, slope, mean_stokes, curv, plateau,
                         tuple(float(p.T) for p, h in zip(points, high) if h), tuple(notes))
