import dataclasses
import math
from dataclasses import replace

import numpy as np
import pytest

from polatherm import condensim as cs
from polatherm import presets
from polatherm.errors import ConfigurationError, DomainError, IntegrationError, SearchError
from polatherm.units import HBAR, kT


@pytest.fixture(scope="module")
def grid():
    return cs.build_mode_grid(presets.melppp_setup())


@pytest.fixture(scope="module")
def threshold(grid):
    return cs.find_threshold(cs.SimConfig(grid), rtol=1e-2, threads=4)


def with_amplitudes(cfg, pump=0.0, seed=0.0):
    return cfg.with_(pump=replace(cfg.pump, amplitude=pump), seed=replace(cfg.seed, amplitude=seed))


# --- mode grid and rates ---------------------------------------------------

def test_grid_layout(grid):
    assert grid.size == 31
    assert np.all(np.diff(grid.k) > 0) and grid.k[0] == 0.0 and grid.k[-1] < 3.0
    assert np.all(grid.D >= 1)
    assert list(grid.D[:8]) == [1, 1, 1, 2, 3, 4, 4, 5]
    assert grid.D[-1] == 22
    assert grid.gamma[0] == pytest.approx(0.713 * 4.4 + 0.287 * 60.0, abs=0.05)
    s2 = grid.sin2phi
    assert np.allclose(grid.gamma, (1 - s2) * 4.4 + s2 * 60.0, rtol=1e-14)


def test_resonant_mode_decay():
    setup = presets.melppp_setup()
    k_res = math.sqrt(80.0 / 2.2)
    g = cs.build_mode_grid(setup, N=2, k_max=2 * k_res)
    assert g.sin2phi[1] == pytest.approx(0.5, abs=1e-12)
    assert g.gamma[1] == pytest.approx(32.2, abs=1e-10)


def test_thermalization_matrix(grid):
    T = 300.0
    W = cs.thermalization_matrix(grid, 5e-7, T)
    assert np.all(np.diag(W) == 0)
    assert W[5, 0] == 5e-7 and W[30, 2] == 5e-7
    for i, j in ((0, 5), (3, 17), (10, 30)):
        assert W[i, j] / W[j, i] == pytest.approx(math.exp(-(grid.omega[j] - grid.omega[i]) / kT(T)), rel=1e-12)
    with pytest.raises(DomainError):
        cs.thermalization_matrix(grid, -1.0, T)
    assert np.all(cs.thermalization_matrix(grid, 5e-7, 0.0)[np.triu_indices(grid.size, 1)] == 0)


def test_uphill_by_kT():
    g = cs.ModeGrid(np.array([0.0, 1.0]), np.array([0.0, kT(100.0)]), np.ones(2), np.ones(2),
                    np.ones(2), 10.0, 1.0)
    W = cs.thermalization_matrix(g, 2.0, 100.0)
    assert W[0, 1] == pytest.approx(2.0 / math.e, rel=1e-14)


def test_scattering_lorentzian(grid):
    sc = cs.ScatterParams()
    assert sc.peak == pytest.approx(2 * 0.5 ** 2 / 2.5)
    w_res = grid.omega_exc - sc.omega_vib
    g = cs.ModeGrid(np.zeros(2), np.array([w_res, w_res + 10 * sc.gamma_vib]), np.full(2, 0.3),
                    np.ones(2), np.ones(2), grid.omega_exc, 60.0)
    G = cs.scattering_rates(g, sc)
    assert G[0] == pytest.approx(sc.peak * 0.3, rel=1e-14)
    assert G[1] == pytest.approx(G[0] / 101.0, rel=1e-12)
    # the resonance sits below the polariton band for the reference set
    assert w_res < grid.omega.min()


def test_microscopic_matrix_kms(grid):
    setup = presets.melppp_setup()
    W = cs.microscopic_thermalization_matrix(grid, setup, presets.melppp_net(), 50.0)
    i, j = 0, 3
    assert W[j, i] / W[i, j] == pytest.approx(math.exp((grid.omega[j] - grid.omega[i]) / kT(50.0)), rel=1e-10)
    hot = cs.microscopic_thermalization_matrix(grid, setup, presets.melppp_net(), 300.0)
    assert hot[j, i] > W[j, i]


# --- integration -----------------------------------------------------------

def test_pure_decay(grid):
    y0 = np.concatenate(([50.0], np.linspace(1.0, 10.0, grid.size)))
    cfg = cs.SimConfig(grid, gamma_therm=0.0, initial=y0, scatter=cs.ScatterParams(gamma0=0.0),
                       t_end=0.5, dt=2e-4, save_stride=50)
    tr = cs.simulate(cfg)
    t = tr.times[:, None]
    assert np.allclose(tr.n, y0[1:] * np.exp(-grid.gamma * t / HBAR), rtol=1e-9)
    assert np.allclose(tr.n_P, 50.0 * np.exp(-60.0 * tr.times / HBAR), rtol=1e-8)
    assert np.all(np.diff(tr.total()) < 0)


def test_bose_einstein_fixed_point(grid):
    be, mu = cs.bose_einstein_state(grid, 300.0, 1e4)
    assert be.sum() == pytest.approx(1e4, rel=1e-9) and mu < grid.omega[0]
    cfg = cs.SimConfig(grid, T=300.0, decay=False, initial=np.concatenate(([0.0], be)),
                       dt=10.0, t_end=1e6, save_stride=10000)
    tr = cs.simulate(cfg)
    assert np.max(np.abs(tr.final - be) / be) < 1e-8


def test_relaxation_reaches_bose_einstein(grid):
    y0 = np.zeros(grid.size + 1)
    y0[-1] = 1e4
    cfg = cs.SimConfig(grid, T=300.0, decay=False, initial=y0, dt=10.0, t_end=1e7, save_stride=100000)
    tr = cs.simulate(cfg)
    be, _ = cs.bose_einstein_state(grid, 300.0, 1e4)
    assert np.max(np.abs(tr.final - be) / be) < 1e-6


def test_particle_bookkeeping(grid):
    rng = np.random.default_rng(3)
    y0 = np.concatenate(([0.0], rng.uniform(0, 100, grid.size)))
    cfg = cs.SimConfig(grid, gamma_therm=1e-4, initial=y0, dt=2e-4, t_end=0.2, save_stride=1)
    tr = cs.simulate(cfg)
    loss = (tr.n * grid.gamma).sum(axis=1) / HBAR
    # Simpson's rule over the RK4 samples
    dt = tr.times[1] - tr.times[0]
    lost = dt / 3 * (loss[0] + loss[-1] + 4 * loss[1:-1:2].sum() + 2 * loss[2:-1:2].sum())
    assert tr.total()[0] - tr.total()[-1] == pytest.approx(lost, rel=1e-8)


def test_non_negativity_random_configs(grid):
    rng = np.random.default_rng(11)
    for _ in range(100):
        y0 = np.concatenate(([rng.uniform(0, 1e4)], rng.uniform(0, 50, grid.size)))
        cfg = cs.SimConfig(grid, gamma_therm=10 ** rng.uniform(-8, -5), T=rng.uniform(0, 500),
                           initial=y0, pump=cs.Pulse(10 ** rng.uniform(3, 7), t0=0.5),
                           seed=cs.Seed(10 ** rng.uniform(0, 4), t0=0.6), dt=5e-4, t_end=1.5,
                           save_stride=10)
        try:
            tr = cs.simulate(cfg)
        except (ConfigurationError, IntegrationError):
            continue
        assert tr.n.min() >= -1e-9 and tr.n_P.min() >= -1e-9


def test_dt_guard(grid):
    with pytest.raises(ConfigurationError, match="dt"):
        cs.simulate(cs.SimConfig(grid, dt=0.05))


def test_config_validation(grid):
    with pytest.raises(ConfigurationError):
        cs.SimConfig(grid, dt=0.0)
    with pytest.raises(ConfigurationError):
        cs.SimConfig(grid, initial=np.ones(3))
    with pytest.raises(ConfigurationError):
        cs.SimConfig(grid, therm=-np.ones((grid.size, grid.size)))
    with pytest.raises(DomainError):
        cs.Pulse(-1.0)
    with pytest.raises(DomainError):
        cs.Seed(1.0, sigma_k=0.0)


def test_seed_profile(grid):
    w = cs.Seed(1.0).profile(grid.k)
    assert w.sum() == pytest.approx(1.0)
    assert grid.k[np.argmax(w)] == pytest.approx(2.516, abs=1e-3)


def test_simulate_many_matches_serial(grid):
    cfgs = [with_amplitudes(cs.SimConfig(grid, t_end=2.0), pump=a) for a in (1e5, 1e6, 3e6)]
    serial = cs.simulate_many(cfgs, threads=1)
    parallel = cs.simulate_many(cfgs, threads=3)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.n, b.n)


# --- threshold and condensation --------------------------------------------

def test_threshold_found(threshold):
    assert 1e3 < threshold.P_th < 1e8
    assert threshold.sharpness > 1.0


def test_threshold_scales_with_losses(grid, threshold):
    lossy = dataclasses.replace(grid, gamma=2.0 * grid.gamma)
    doubled = cs.find_threshold(cs.SimConfig(lossy), rtol=1e-2, threads=4)
    assert 1.5 < doubled.P_th / threshold.P_th < 2.5


def test_threshold_without_thermalization(grid, threshold):
    # at 5e-10 eV the hops are negligible next to the losses, so the threshold barely moves
    off = cs.find_threshold(cs.SimConfig(grid, gamma_therm=0.0), rtol=1e-2, threads=4)
    assert off.P_th >= 0.99 * threshold.P_th


def test_threshold_search_error(grid):
    with pytest.raises(SearchError):
        cs.find_threshold(cs.SimConfig(grid), lo=1e3, hi=1e4)
    with pytest.raises(SearchError):
        cs.find_threshold(cs.SimConfig(grid), lo=1e7, hi=5e7)


def test_ground_state_condensation(grid, threshold):
    tr = cs.simulate(with_amplitudes(cs.SimConfig(grid), pump=2 * threshold.P_th))
    ek = cs.ek_distribution(tr, integrated=True)
    assert int(np.argmax(ek[:, 2])) == 0
    assert tr.peak[0] > 1.0


def test_seeded_condensation(grid, threshold):
    cfg = cs.SimConfig(grid)
    i = int(np.argmin(np.abs(grid.k - presets.K_SEED)))
    both = cs.simulate(with_amplitudes(cfg, 2 * threshold.P_th, 1e4))
    assert int(np.argmax(cs.ek_distribution(both, integrated=True)[:, 2])) == i
    # stimulated gain: the pumped and seeded mode exceeds the sum of either drive alone
    seed_only = cs.simulate(with_amplitudes(cfg, 0.0, 1e4)).peak[i]
    pump_only = cs.simulate(with_amplitudes(cfg, 2 * threshold.P_th, 0.0)).peak[i]
    assert both.peak[i] > 2.0 * (seed_only + pump_only)


# --- analysis helpers ------------------------------------------------------

def test_ek_zero_trajectory(grid):
    tr = cs.simulate(cs.SimConfig(grid, t_end=0.1))
    for integrated in (False, True):
        ek = cs.ek_distribution(tr, integrated=integrated)
        assert ek.shape == (grid.size, 3) and np.all(ek[:, 2] == 0)
    assert np.array_equal(ek[:, 0], grid.k)


def test_ek_per_state(grid):
    y0 = np.concatenate(([0.0], grid.D * 2.0))
    tr = cs.simulate(cs.SimConfig(grid, gamma_therm=0.0, decay=False, initial=y0, t_end=0.01))
    assert np.allclose(cs.ek_distribution(tr)[:, 2], 2.0)
    assert np.allclose(cs.ek_distribution(tr, per_state=False)[:, 2], grid.D * 2.0)


def test_relaxation_time_interpolates(grid):
    times = np.array([0.0, 1.0, 2.0])
    n = np.zeros((3, grid.size))
    n[:, 0] = [0.0, 2.0, 4.0]
    tr = cs.SimTrajectory(times, np.zeros(3), n, grid)
    assert cs.relaxation_time(tr) == pytest.approx(1.0)
    assert cs.relaxation_time(tr, fraction=0.25) == pytest.approx(0.5)
    assert cs.relaxation_time(tr, reference=100.0) == math.inf


def test_bose_einstein_errors(grid):
    with pytest.raises(DomainError):
        cs.bose_einstein_state(grid, 0.0, 10.0)
    with pytest.raises(DomainError):
        cs.bose_einstein_state(grid, 300.0, 0.0)
