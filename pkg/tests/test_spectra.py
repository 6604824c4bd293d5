import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polatherm import spectra as sp
from polatherm.errors import ConfigurationError, DomainError, NumericError
from polatherm.extraction import fit_00_peak
from polatherm.units import bose_occupation, poisson_weight, to_meV


def single(omega_v, lam2, gamma=34.0, omega_M=None, **kw):
    return sp.MolecularSystem(2720.0, gamma, (sp.VibrationalMode(omega_v, lam2, **kw),), omega_M)


def gauss(x, c, s):
    return np.exp(-(x - c) ** 2 / (2 * s * s)) / (math.sqrt(2 * math.pi) * s)


# --- exact model ---------------------------------------------------------

def test_no_modes_is_single_gaussian():
    sys = sp.MolecularSystem(2720.0, 34.0)
    grid = sp.default_grid(sys)
    em, ab = sp.spectrum_pair(sys, 300.0, grid)
    ref = gauss(grid, 2720.0, 34.0)
    # the kernel drops tails beyond 12 widths (below 1e-31 of the peak)
    np.testing.assert_allclose(em.intensity, ref / np.trapezoid(ref, grid), rtol=1e-10, atol=1e-30)
    np.testing.assert_allclose(ab.intensity, em.intensity, rtol=1e-12)


def test_single_mode_franck_condon_heights():
    # well separated replicas: heights follow z_k(0.7)
    sys = single(200.0, 0.7, gamma=5.0)
    grid = sp.default_grid(sys, step=0.25)
    em = sp.emission_exact(sys, 0.0, grid)
    heights = [em.intensity[np.argmin(abs(grid - (2720.0 - 200.0 * k)))] for k in range(3)]
    expected = poisson_weight(np.arange(3), 0.7)
    np.testing.assert_allclose(np.array(heights) / heights[0], expected / expected[0], rtol=1e-9)


def test_melppp_6K_dominant_maxima(melppp):
    grid = sp.adequate_grid(melppp, 6.0)
    em = sp.emission_exact(melppp, 6.0, grid)
    from scipy.signal import find_peaks
    idx, _ = find_peaks(em.intensity)
    top = idx[np.argsort(em.intensity[idx])[-2:]]
    positions = np.sort(grid[top])
    # replica roughly one high-frequency quantum (~0.19 eV) below the 0-0 peak
    assert positions[1] == pytest.approx(2720.0 - 14.1, abs=6.0)
    assert positions[1] - positions[0] == pytest.approx(190.0, abs=15.0)


@pytest.mark.parametrize("T", [6.0, 300.0])
def test_normalization_and_mirror(melppp, T):
    grid = sp.adequate_grid(melppp, T)
    em, ab = sp.spectrum_pair(melppp, T, grid)
    assert em.integral() == pytest.approx(1.0, abs=1e-6)
    assert ab.integral() == pytest.approx(1.0, abs=1e-6)
    # grid is symmetric about omega_0, so mirroring is an index reversal
    np.testing.assert_allclose(ab.intensity, em.intensity[::-1], rtol=1e-10, atol=0)


def test_mirror_reduced(melppp):
    grid = sp.adequate_grid(melppp, 300.0, model="reduced")
    em, ab = sp.spectrum_pair(melppp, 300.0, grid, "reduced")
    np.testing.assert_allclose(ab.intensity, em.intensity[::-1], rtol=1e-10, atol=0)


def test_single_low_mode_stokes_shift():
    lam2, w = 0.7, to_meV(48.0, "cm-1")
    sys = single(w, lam2)
    grid = sp.adequate_grid(sys, 300.0)
    em, ab = sp.spectrum_pair(sys, 300.0, grid)
    shift = fit_00_peak(ab).center - fit_00_peak(em).center
    assert 2 * lam2 * w == pytest.approx(8.33, abs=0.01)
    # first moments carry the exact shift; the fitted maximum is pulled by
    # the Poisson skew by ~0.05 meV
    moment = 2 * (np.trapezoid(grid * ab.intensity, grid) - 2720.0)
    assert moment == pytest.approx(2 * lam2 * w, rel=1e-6)
    assert shift == pytest.approx(2 * lam2 * w, abs=0.1)


def test_anti_stokes_boltzmann_ratio():
    w, T = 20.0, 300.0
    sys = single(w, 0.3, gamma=1.0)
    grid = 2720.0 + 0.05 * np.arange(-1600, 1601)
    em = sp.emission_exact(sys, T, grid)
    at = lambda e: em.intensity[np.argmin(abs(grid - e))]
    n = bose_occupation(w, T)
    assert at(2720.0 + w) / at(2720.0 - w) == pytest.approx(n / (1 + n), rel=0.01)


def test_truncation_not_converged():
    sys = single(5.0, 30.0)
    with pytest.raises(NumericError, match="omega_v=5"):
        sp.emission_exact(sys, 300.0, max_quanta=10)


def test_gaussian_regime_guard():
    sys = sp.MolecularSystem(2720.0, 1.0, (), None, gamma_diss=10.0)
    with pytest.raises(DomainError):
        sp.emission_exact(sys, 300.0)


def test_unknown_model(melppp):
    with pytest.raises(ConfigurationError):
        sp.spectrum_pair(melppp, 300.0, model="voigt")


def test_low_high_split(melppp):
    assert len(melppp.low_modes) == 2 and len(melppp.high_modes) == 3
    assert all(m.omega_v <= melppp.omega_M for m in melppp.low_modes)
    assert [m.omega_v for m in melppp.modes] == sorted(m.omega_v for m in melppp.modes)


def test_invalid_mode():
    with pytest.raises(DomainError):
        sp.VibrationalMode(0.0, 0.1)
    with pytest.raises(DomainError):
        sp.VibrationalMode(10.0, float("inf"))


def test_grid_must_increase():
    with pytest.raises(ConfigurationError):
        sp.SpectralCurve(np.array([1.0, 1.0]), np.array([0.0, 0.0]), "emission", 0.0)


# --- homogeneous model ---------------------------------------------------

def test_homogeneous_zero_T_has_no_hot_bands():
    sys = sp.MolecularSystem(2720.0, 34.0, (sp.VibrationalMode(100.0, 0.5, 2.0),), None, gamma_diss=4.0)
    grid = 2720.0 + 0.1 * np.arange(-3000, 3001)
    em = sp.emission_homogeneous(sys, 0.0, grid)
    # nothing above the 0-0 line beyond the Lorentzian tail
    lor = lambda x, c, g: g / math.pi / ((x - c) ** 2 + g * g)
    w0, w1 = poisson_weight(0, 0.5), poisson_weight(1, 0.5)
    ref = w0 * lor(grid, 2720.0, 2.0) + w1 * lor(grid, 2620.0, 4.0)
    i = np.argmin(abs(grid - 2720.0))
    assert em.intensity[i] == pytest.approx(ref[i], rel=1e-3)


def test_homogeneous_replica_linewidth():
    # k=1, k'=0 replica: HWHM gamma_diss/2 + gamma_v
    sys = sp.MolecularSystem(2720.0, 34.0, (sp.VibrationalMode(300.0, 0.2, 3.0),), None, gamma_diss=2.0)
    grid = 2720.0 + 0.01 * np.arange(-40000, 2001)
    em = sp.emission_homogeneous(sys, 0.0, grid)
    sel = abs(grid - 2420.0) < 40
    x, y = grid[sel], em.intensity[sel]
    half = y.max() / 2
    above = x[y >= half]
    assert (above[-1] - above[0]) / 2 == pytest.approx(1.0 + 3.0, rel=0.01)


def test_homogeneous_zero_width():
    sys = sp.MolecularSystem(2720.0, 34.0)
    with pytest.raises(NumericError):
        sp.emission_homogeneous(sys, 0.0)


def test_homogeneous_no_modes_single_lorentzian():
    sys = sp.MolecularSystem(2720.0, 34.0, (), None, gamma_diss=4.0)
    grid = sp.default_grid(sys, step=0.1)
    em = sp.emission_homogeneous(sys, 300.0, grid)
    i = np.argmax(em.intensity)
    assert grid[i] == pytest.approx(2720.0, abs=0.05)


# --- reduced model -------------------------------------------------------

def test_effective_peak_params(melppp):
    em6, ab6, g6 = sp.effective_peak_params(melppp, 6.0)
    assert 2720.0 - em6 == pytest.approx(0.7 * 5.9512415 + 0.5 * 19.8374717, rel=1e-7)
    assert 2720.0 - em6 == pytest.approx(14.09, abs=0.01)
    assert ab6 - em6 == pytest.approx(28.17, abs=0.01)
    assert g6 ** 2 == pytest.approx(1377.6, abs=0.1)
    assert g6 == pytest.approx(37.1, abs=0.05)
    _, _, g300 = sp.effective_peak_params(melppp, 300.0)
    assert g300 ** 2 == pytest.approx(1910, abs=2)
    assert g300 == pytest.approx(43.7, abs=0.05)


def test_reduced_no_low_modes_equals_exact(melppp):
    sys = melppp.without_low_modes()
    grid = sp.adequate_grid(sys, 6.0)
    np.testing.assert_allclose(sp.emission_reduced(sys, 6.0, grid).intensity,
                               sp.emission_exact(sys, 6.0, grid).intensity, rtol=1e-10, atol=1e-300)


def test_reduced_no_high_modes_single_gaussian(melppp):
    sys = sp.MolecularSystem(2720.0, 34.0, melppp.low_modes, melppp.omega_M)
    w_em, _, g = sp.effective_peak_params(sys, 300.0)
    grid = sp.adequate_grid(sys, 300.0, model="reduced")
    em = sp.emission_reduced(sys, 300.0, grid)
    ref = gauss(grid, w_em, g)
    np.testing.assert_allclose(em.intensity, ref / np.trapezoid(ref, grid), rtol=1e-9)


def test_reduced_center_at_6K(melppp):
    grid = sp.adequate_grid(melppp, 6.0, model="reduced")
    em = sp.emission_reduced(melppp, 6.0, grid)
    fit = fit_00_peak(em, model="skewed")
    assert fit.center == pytest.approx(2720.0 - 14.09, abs=0.5)


@pytest.mark.parametrize("lam2, w", [(1.0, 6.0), (1.0, 3.0), (2.0, 6.0)])
def test_sum_to_integral_consistency(lam2, w):
    # position change measured against the peak width; near x = 3 the
    # truncated-Gaussian replacement drifts past 2% (see decisions ledger)
    T = 300.0
    sys = single(w, lam2, omega_M=30.0)
    assert (1 + bose_occupation(w, T)) * lam2 >= 4.5
    grid = sp.adequate_grid(sys, T)
    a = fit_00_peak(sp.emission_exact(sys, T, grid))
    b = fit_00_peak(sp.emission_exact(sys, T, grid, low_mode_sums="integral"))
    assert abs(a.center - b.center) < 0.02 * a.sigma
    assert b.sigma == pytest.approx(a.sigma, rel=0.02)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(30.0, 250.0), st.floats(0.0, 400.0))
def test_normalization_property(lam2, w, T):
    sys = single(w, lam2, gamma=20.0)
    grid = sp.adequate_grid(sys, T)
    em, ab = sp.spectrum_pair(sys, T, grid)
    assert em.integral() == pytest.approx(1.0, abs=1e-6)
    assert np.all(em.intensity >= 0)
    np.testing.assert_allclose(ab.intensity, em.intensity[::-1], rtol=1e-10, atol=0)
