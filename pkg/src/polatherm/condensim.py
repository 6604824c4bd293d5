"""Mean-field rate equations for pulsed polariton condensation.

An exciton reservoir ``n_P`` is filled by a pump pulse and scatters into N
lower-polariton modes ``n_i`` (each grouping ``D_i`` in-plane states) by
emitting one high-energy vibration. Modes decay at Hopfield-weighted rates
and exchange population through a thermalization matrix obeying detailed
balance::

    dn_P/dt = -g_P n_P + kappa_P(t) - sum_j G_j n_P (n_j + D_j)
    dn_i/dt = -g_i n_i + kappa_s(k_i, t) + G_i n_P (n_i + D_i)
              + sum_j [W_ji n_j (n_i + D_i) - W_ij n_i (n_j + D_j)]

Rates are specified as energies (meV) and divided by hbar; time is in ps.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DomainError, IntegrationError, SearchError
from .extraction import LowFreqNet
from .polariton import PolaritonSetup, exciton_fraction, lower_branch
from .rates import SpectralDensityModel, therm_rate_pair
from .units import HBAR, ensure_temperature, kT
from . import presets

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
NEGATIVE_TOLERANCE = 1e-9
STABILITY = 0.1


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Lower-polariton modes plus the exciton reservoir.

    Arrays are indexed by mode; energies and rates in meV, k in 1/um.
    """

    k: np.ndarray
    omega: np.ndarray
    sin2phi: np.ndarray
    gamma: np.ndarray
    D: np.ndarray
    omega_exc: float
    gamma_exc: float

    @property
    def size(self) -> int:
        return int(self.k.size)


def build_mode_grid(setup: PolaritonSetup, N: int = 31, k_max: float = 3.0,
                    gamma_cav: float = presets.GAMMA_CAV,
                    gamma_exc: float = presets.GAMMA_EXC) -> ModeGrid:
    """N modes uniform on ``[0, k_max)`` with annulus state counting.

    ``D_i = round(k_i dk S / 2 pi)`` for ``i > 0`` and
    ``D_0 = round(pi (dk/2)^2 S / (2 pi)^2)``, both floored at one.
    """
    if N < 1 or k_max <= 0:
        raise DomainError("mode grid needs N >= 1 and k_max > 0")
    dk = k_max / N
    k = dk * np.arange(N)
    S = setup.cavity.area_S
    D = np.rint(k * dk * S / (2.0 * math.pi))
    D[0] = np.rint(math.pi * (dk / 2.0) ** 2 * S / (2.0 * math.pi) ** 2)
    D = np.maximum(D, 1.0)
    s2 = exciton_fraction(setup, k)
    gamma = (1.0 - s2) * gamma_cav + s2 * gamma_exc
    return ModeGrid(k, lower_branch(setup, k), s2, gamma, D, float(setup.omega_0), float(gamma_exc))


def thermalization_matrix(grid: ModeGrid, gamma_therm: float, T: float) -> np.ndarray:
    """Constant-rate detailed-balance matrix ``W[i, j]`` for hops i -> j (meV).

    Downhill hops run at ``gamma_therm``; uphill ones are suppressed by
    ``exp(-(w_j - w_i) / kT)`` (zero at T = 0).
    """
    if gamma_therm < 0:
        raise DomainError("gamma_therm must be >= 0")
    T = ensure_temperature(T)
    up = grid.omega[None, :] - grid.omega[:, None]
    with np.errstate(over="ignore"):
        factor = np.exp(-up / kT(T)) if T > 0 else np.zeros_like(up)
    W = np.where(up > 0, gamma_therm * factor, gamma_therm)
    np.fill_diagonal(W, 0.0)
    return W


def microscopic_thermalization_matrix(grid: ModeGrid, setup: PolaritonSetup, net: LowFreqNet,
                                      T: float, variant: str = "flat_A2",
                                      scale: float = 1.0) -> np.ndarray:
    """Pair rates from the vibrational spectral density, ``W[i, j]`` for i -> j.

    Unlike the constant matrix, the downhill rate carries the ``1 + n(dw)``
    emission factor and therefore grows with temperature.
    """
    T = ensure_temperature(T)
    sd = SpectralDensityModel(variant, net)
    n = grid.size
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            hi, lo = (j, i) if grid.omega[j] > grid.omega[i] else (i, j)
            pair = therm_rate_pair(setup, sd, grid.k[hi], grid.k[lo], T, check_spacing=False)
            W[hi, lo] = scale * pair.gamma_down
            W[lo, hi] = scale * pair.gamma_up
    return W


@dataclass(frozen=True)
class ScatterParams:
    """Reservoir-to-polariton scattering assisted by one vibration.

    ``gamma0=None`` uses the golden-rule peak ``2 g^2 / gamma_vib``.
    """

    omega_vib: float = presets.OMEGA_VIB
    gamma_vib: float = presets.GAMMA_VIB
    g: float = presets.G_VIB
    gamma0: float | None = None

    @property
    def peak(self) -> float:
        return 2.0 * self.g ** 2 / self.gamma_vib if self.gamma0 is None else self.gamma0


def scattering_rates(grid: ModeGrid, scatter: ScatterParams) -> np.ndarray:
    """``G_i = G0 sin^2(phi_i) gamma_vib^2 / ((w_exc - w_vib - w_i)^2 + gamma_vib^2)`` (meV)."""
    if scatter.gamma_vib <= 0:
        raise DomainError("gamma_vib must be positive")
    det = grid.omega_exc - scatter.omega_vib - grid.omega
    return scatter.peak * grid.sin2phi * scatter.gamma_vib ** 2 / (det ** 2 + scatter.gamma_vib ** 2)


@dataclass(frozen=True)
class Pulse:
    """Gaussian pulse delivering ``amplitude`` particles in total."""

    amplitude: float = 0.0
    t0: float = 1.0
    fwhm: float = presets.PULSE_FWHM

    def __post_init__(self):
        if self.amplitude < 0 or self.fwhm <= 0:
            raise DomainError("pulse needs amplitude >= 0 and fwhm > 0")


@dataclass(frozen=True)
class Seed(Pulse):
    """Pulse into the modes near ``k_seed``, Gaussian in k with width ``sigma_k``."""

    k_seed: float = presets.K_SEED
    sigma_k: float = presets.SIGMA_SEED

    def __post_init__(self):
        super().__post_init__()
        if self.sigma_k <= 0:
            raise DomainError("seed width must be positive")

    def profile(self, k: np.ndarray) -> np.ndarray:
        w = np.exp(-0.5 * ((k - self.k_seed) / self.sigma_k) ** 2)
        return w / w.sum()


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything one simulation needs.

    ``therm`` overrides the constant matrix built from ``gamma_therm`` and
    ``T``. ``decay=False`` switches off all linear losses. ``initial`` is the
    state ``[n_P, n_0, ..., n_{N-1}]`` at t = 0.
    """

    grid: ModeGrid
    gamma_therm: float = presets.GAMMA_THERM
    T: float = 300.0
    pump: Pulse = Pulse()
    seed: Seed = Seed()
    scatter: ScatterParams = ScatterParams()
    dt: float = 5e-4
    t_end: float = 10.0
    save_stride: int = 20
    therm: np.ndarray | None = None
    decay: bool = True
    initial: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0 or self.save_stride < 1:
            raise ConfigurationError("dt, t_end and save_stride must be positive")
        ensure_temperature(self.T)
        if self.therm is None:
            object.__setattr__(self, "therm", thermalization_matrix(self.grid, self.gamma_therm, self.T))
        W = np.asarray(self.therm, dtype=float)
        if W.shape != (self.grid.size,) * 2 or np.any(W < 0):
            raise ConfigurationError("thermalization matrix must be N x N and non-negative")
        object.__setattr__(self, "therm", W)
        if self.initial is not None:
            y0 = np.asarray(self.initial, dtype=float)
            if y0.shape != (self.grid.size + 1,) or np.any(y0 < 0):
                raise ConfigurationError("initial state must hold N + 1 non-negative occupations")
            object.__setattr__(self, "initial", y0)

    def with_(self, **changes) -> "SimConfig":
        if "therm" not in changes and any(c in changes for c in ("gamma_therm", "T", "grid")):
            changes["therm"] = None
        return replace(self, **changes)

    def max_rate(self) -> float:
        """Fastest linear rate (1/ps) at the initial state, for the step check."""
        y0 = self.initial if self.initial is not None else np.zeros(self.grid.size + 1)
        n = y0[1:]
        out_therm = self.therm @ (n + self.grid.D)
        lin = np.concatenate(([self.grid.gamma_exc], self.grid.gamma)) if self.decay else np.zeros(1)
        return float(max(lin.max(), out_therm.max())) / HBAR


@dataclass(frozen=True, eq=False)
class SimTrajectory:
    """Saved samples of a run: ``times`` (ps), reservoir and mode occupations."""

    times: np.ndarray
    n_P: np.ndarray
    n: np.ndarray
    grid: ModeGrid

    @property
    def peak(self) -> np.ndarray:
        return self.n.max(axis=0)

    @property
    def final(self) -> np.ndarray:
        return self.n[-1]

    def total(self) -> np.ndarray:
        return self.n.sum(axis=1)


@numba.njit(cache=True)
def _gauss_pulse(t, amp, t0, sigma):
    if amp == 0.0:
        return 0.0
    x = (t - t0) / sigma
    return amp * math.exp(-0.5 * x * x) / (math.sqrt(2.0 * math.pi) * sigma)


@numba.njit(cache=True)
def _rhs(t, y, out, gP, g, D, G, W, pump, seed_w, seed):
    n_modes = g.size
    nP = y[0]
    kp = _gauss_pulse(t, pump[0], pump[1], pump[2])
    ks = _gauss_pulse(t, seed[0], seed[1], seed[2])
    drain = 0.0
    for i in range(n_modes):
        ni = y[1 + i]
        occ = ni + D[i]
        gain = G[i] * nP * occ
        drain += gain
        flow = 0.0
        for j in range(n_modes):
            nj = y[1 + j]
            flow += W[j, i] * nj * occ - W[i, j] * ni * (nj + D[j])
        out[1 + i] = -g[i] * ni + ks * seed_w[i] + gain + flow
    out[0] = -gP * nP + kp - drain


@numba.njit(cache=True, nogil=True)
def _integrate(y0, t0, dt, n_steps, stride, gP, g, D, G, W, pump, seed_w, seed, tol):
    n = y0.size
    n_save = n_steps // stride + 1
    saved = np.empty((n_save, n))
    times = np.empty(n_save)
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    saved[0] = y
    times[0] = t0
    s = 1
    t = t0
    for step in range(1, n_steps + 1):
        _rhs(t, y, k1, gP, g, D, G, W, pump, seed_w, seed)
        for m in range(n):
            tmp[m] = y[m] + 0.5 * dt * k1[m]
        _rhs(t + 0.5 * dt, tmp, k2, gP, g, D, G, W, pump, seed_w, seed)
        for m in range(n):
            tmp[m] = y[m] + 0.5 * dt * k2[m]
        _rhs(t + 0.5 * dt, tmp, k3, gP, g, D, G, W, pump, seed_w, seed)
        for m in range(n):
            tmp[m] = y[m] + dt * k3[m]
        _rhs(t + dt, tmp, k4, gP, g, D, G, W, pump, seed_w, seed)
        bad = False
        for m in range(n):
            y[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
            if not (y[m] >= -tol):
                bad = True
        t = t0 + step * dt
        if bad:
            return saved[:s], times[:s], step
        if step % stride == 0:
            saved[s] = y
            times[s] = t
            s += 1
    return saved[:s], times[:s], 0


def simulate(config: SimConfig) -> SimTrajectory:
    """Fixed-step RK4 integration of the rate equations over ``[0, t_end]``.

    Raises
    ------
    ConfigurationError
        If ``dt`` does not resolve the fastest initial rate.
    IntegrationError
        On NaN or an occupation below ``-1e-9``.
    """
    grid = config.grid
    if config.dt * config.max_rate() >= STABILITY:
        raise ConfigurationError(
            f"dt = {config.dt:g} ps does not resolve the fastest rate "
            f"{config.max_rate():.4g} 1/ps (need dt * rate < {STABILITY})")
    n_steps = int(round(config.t_end / config.dt))
    y0 = np.zeros(grid.size + 1) if config.initial is None else config.initial.copy()
    scale = 1.0 / HBAR
    gP = grid.gamma_exc * scale if config.decay else 0.0
    g = grid.gamma * scale if config.decay else np.zeros(grid.size)
    G = scattering_rates(grid, config.scatter) * scale
    W = np.ascontiguousarray(config.therm * scale)
    p, s = config.pump, config.seed
    pump = np.array([p.amplitude, p.t0, p.fwhm * FWHM_TO_SIGMA])
    seed = np.array([s.amplitude, s.t0, s.fwhm * FWHM_TO_SIGMA])
    saved, times, failed = _integrate(y0, 0.0, config.dt, n_steps, config.save_stride, gP,
                                      np.ascontiguousarray(g), np.ascontiguousarray(grid.D, dtype=float),
                                      np.ascontiguousarray(G), W, pump, s.profile(grid.k), seed,
                                      NEGATIVE_TOLERANCE)
    if failed:
        raise IntegrationError(
            f"occupation became negative or NaN at step {failed} (t = {failed * config.dt:.4g} ps); "
            f"reduce dt below {config.dt:g} ps")
    return SimTrajectory(times, saved[:, 0], saved[:, 1:], grid)


def simulate_many(configs, threads: int = 1) -> list[SimTrajectory]:
    """Run independent simulations, in parallel threads when ``threads > 1``.

    The integrator releases the GIL, so threads give real concurrency.
    """
    configs = list(configs)
    if threads <= 1 or len(configs) < 2:
        return [simulate(c) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(simulate, configs))


def relaxation_time(traj: SimTrajectory, mode: int = 0, fraction: float = 0.5,
                    reference: float | None = None) -> float:
    """First time the occupation of ``mode`` reaches ``fraction * reference``.

    ``reference`` defaults to the final occupation; crossings are linearly
    interpolated between saved samples. Returns ``inf`` if never reached.
    """
    n = traj.n[:, mode]
    target = fraction * (n[-1] if reference is None else reference)
    above = np.nonzero(n >= target)[0]
    if above.size == 0:
        return math.inf
    i = int(above[0])
    if i == 0:
        return float(traj.times[0])
    t0, t1, a, b = traj.times[i - 1], traj.times[i], n[i - 1], n[i]
    return float(t0 + (target - a) / (b - a) * (t1 - t0))


def ek_distribution(traj: SimTrajectory, at_time: float | None = None,
                    integrated: bool = False, per_state: bool = True) -> np.ndarray:
    """Occupation at each (k, E) point as rows ``(k_i, omega_i, occupation)``.

    Parameters
    ----------
    at_time : float, optional
        Sample nearest to this time; default is the last sample.
    integrated : bool
        Time-integrate the occupation over the whole trajectory (ps) instead,
        which is what a time-integrated emission map records.
    per_state : bool
        Divide mode occupations by their degeneracy ``D_i``.
    """
    if integrated:
        occ = np.trapezoid(traj.n, traj.times, axis=0) if traj.times.size > 1 else traj.n[0] * 0.0
    else:
        idx = -1 if at_time is None else int(np.argmin(np.abs(traj.times - at_time)))
        occ = traj.n[idx]
    if per_state:
        occ = occ / traj.grid.D
    return np.column_stack([traj.grid.k, traj.grid.omega, occ])


def bose_einstein_state(grid: ModeGrid, T: float, total: float) -> tuple[np.ndarray, float]:
    """Equilibrium ``n_i = D_i / (exp((w_i - mu)/kT) - 1)`` holding ``total`` particles.

    Returns the occupations and the chemical potential (meV), found by
    bracketed root finding.
    """
    T = ensure_temperature(T)
    if T == 0 or total <= 0:
        raise DomainError("equilibrium state needs T > 0 and a positive particle number")
    beta = 1.0 / kT(T)
    w0 = float(grid.omega.min())

    def occ(mu):
        return grid.D / np.expm1(beta * (grid.omega - mu))

    def excess(mu):
        return occ(mu).sum() - total

    lo = w0 - 50.0 * kT(T) - 1.0
    while excess(lo) > 0:
        lo -= 50.0 * kT(T)
    hi = w0 - 1e-300 - abs(w0) * 1e-15
    gap = 1.0
    while excess(w0 - gap) < 0:
        gap /= 2.0
        if gap < 1e-14 * max(abs(w0), 1.0):
            raise SearchError("cannot bracket the chemical potential")
    hi = w0 - gap
    mu = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return occ(mu), mu


@dataclass(frozen=True)
class ThresholdResult:
    """Pump threshold and the scan that located it."""

    P_th: float
    sharpness: float
    scan: tuple = field(default=())


def peak_ground_occupation(config: SimConfig, amplitude: float) -> float:
    traj = simulate(config.with_(pump=replace(config.pump, amplitude=amplitude)))
    return float(traj.n[:, 0].max())


def find_threshold(config: SimConfig, lo: float = 1e3, hi: float = 1e8, rtol: float = 1e-3,
                   max_iter: int = 80, threads: int = 1) -> ThresholdResult:
    """Pump amplitude at which the peak ground-mode occupation reaches one.

    Bisection on ``log(amplitude)`` inside ``[lo, hi]``. ``sharpness`` is the
    logarithmic slope ``d ln n0 / d ln P`` across +-5% of the threshold.

    Raises
    ------
    SearchError
        If the occupation does not cross one inside the bracket.
    """
    scan = []

    def probe(a):
        v = peak_ground_occupation(config, a)
        scan.append((a, v))
        return v

    def probe_many(amps):
        runs = simulate_many([config.with_(pump=replace(config.pump, amplitude=a)) for a in amps], threads)
        vals = [float(r.n[:, 0].max()) for r in runs]
        scan.extend(zip(amps, vals))
        return vals

    at_lo, at_hi = probe_many([lo, hi])
    if at_lo >= 1.0:
        raise SearchError(f"peak n0 already >= 1 at the lower bracket {lo:g}")
    if at_hi < 1.0:
        raise SearchError(f"peak n0 stays below 1 up to pump amplitude {hi:g}")
    a, b = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        if b - a < rtol:
            break
        mid = 0.5 * (a + b)
        if probe(math.exp(mid)) >= 1.0:
            b = mid
        else:
            a = mid
    p_th = math.exp(0.5 * (a + b))
    up, down = probe_many([1.05 * p_th, p_th / 1.05])
    sharp = math.log(up / down) / (2.0 * math.log(1.05)) if down > 0 else math.inf
    return ThresholdResult(p_th, sharp, tuple(sorted(scan)))
