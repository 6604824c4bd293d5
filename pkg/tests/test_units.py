import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polatherm import units
from polatherm.errors import ConfigurationError, DomainError
from polatherm.units import Energy, bose_occupation, convert_energy, kT, poisson_weight


def test_constants():
    assert units.KB == pytest.approx(8.617333262e-2, rel=1e-15)
    assert units.HBAR == pytest.approx(0.6582119569, rel=1e-15)
    assert units.to_meV(1.0, "cm-1") == pytest.approx(1.239841984e-1, rel=1e-12)


@pytest.mark.parametrize("value, unit, target, expected", [
    (48.0, "cm-1", "meV", 5.9512415232),
    (0.0, "meV", "eV", 0.0),
    (1.0, "eV", "meV", 1000.0),
])
def test_convert_energy_examples(value, unit, target, expected):
    out = convert_energy(Energy(value, unit), target)
    assert out.unit == target
    assert out.value == pytest.approx(expected, rel=1e-12, abs=0.0)


def test_unknown_unit():
    with pytest.raises(ConfigurationError):
        convert_energy(Energy(1.0, "meV"), "furlong")


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_round_trip_ev_cm1(x):
    back = convert_energy(convert_energy(Energy(x, "eV"), "cm-1"), "eV").value
    assert abs(back - x) <= 1e-12 * x


def test_bose_examples():
    assert bose_occupation(5.0, 0.0) == 0.0
    assert bose_occupation(kT(77.0) * math.log(2.0), 77.0) == pytest.approx(1.0, rel=1e-12)
    # kT(300 K) = 25.852 meV
    assert bose_occupation(25.85, 300.0) == pytest.approx(1.0 / math.expm1(25.85 / kT(300.0)), rel=1e-14)
    assert bose_occupation(25.85, 300.0) == pytest.approx(0.5820, abs=1e-4)


def test_bose_domain():
    with pytest.raises(DomainError):
        bose_occupation(0.0, 300.0)
    with pytest.raises(DomainError):
        bose_occupation(-1.0, 10.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 200.0), st.floats(1.0, 1000.0))
def test_bose_kms_identity(de, T):
    if de / kT(T) > 600:
        assert bose_occupation(de, T) < 1e-260
        return
    n = bose_occupation(de, T)
    assert n * math.exp(de / kT(T)) == pytest.approx(1.0 + n, rel=1e-12)


def test_poisson_examples():
    assert poisson_weight(0, 0.0) == 1.0
    assert poisson_weight(3, 0.0) == 0.0
    assert poisson_weight(1, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
    # large n stays finite
    assert np.isfinite(poisson_weight(500, 400.0))


@pytest.mark.parametrize("x", [0.0, 0.082, 0.5, 0.7, 3.0, 10.0])
def test_poisson_partial_sums(x):
    w = poisson_weight(np.arange(80), x)
    cum = np.cumsum(w)
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == pytest.approx(1.0, abs=1e-12)


def test_negative_temperature():
    with pytest.raises(DomainError):
        units.ensure_temperature(-1.0)
