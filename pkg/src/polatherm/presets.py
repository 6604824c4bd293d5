"""Reference parameter set for a MeLPPP film and microcavity."""
from __future__ import annotations

from .extraction import LowFreqNet
from .polariton import CavityConfig, PolaritonSetup
from .spectra import MolecularSystem, VibrationalMode
from .units import to_meV

OMEGA_0 = 2720.0          # meV, dressed 0-0 exciton energy
GAMMA_INHOM = 34.0        # meV
OMEGA_M = to_meV(200.0, "cm-1")
MODE_TABLE_CM1 = ((48.0, 0.7), (160.0, 0.5), (1320.0, 0.3), (1568.0, 0.23), (1604.0, 0.082))

OMEGA_CAV0 = 2640.0       # meV
ALPHA_CAV = 2.2           # meV um^2
RABI = 85.0               # meV
AREA = 500.0              # um^2
N_MOL = 1e8

# net low-frequency parameters quoted for this film
A1_QUOTED = 18.0          # meV
A2_QUOTED = 200.0         # meV^2

GAMMA_CAV = 4.4           # meV
GAMMA_EXC = 60.0          # meV
OMEGA_VIB = 199.0         # meV
GAMMA_VIB = 2.5           # meV
G_VIB = 0.5               # meV
K_SEED = 2.55             # 1/um
SIGMA_SEED = 0.2          # 1/um
PULSE_FWHM = 0.2          # ps
GAMMA_THERM = 5e-7        # meV (5e-10 eV)


def melppp_modes():
    return tuple(VibrationalMode(to_meV(w, "cm-1"), s) for w, s in MODE_TABLE_CM1)


def melppp_system(**overrides) -> MolecularSystem:
    kw = dict(omega_0=OMEGA_0, gamma_inhom=GAMMA_INHOM, modes=melppp_modes(), omega_M=OMEGA_M)
    kw.update(overrides)
    return MolecularSystem(**kw)


def melppp_setup(**overrides) -> PolaritonSetup:
    cav = {k: overrides.pop(k) for k in ("omega_cav0", "alpha_cav", "area_S") if k in overrides}
    cavity = CavityConfig(**{"omega_cav0": OMEGA_CAV0, "alpha_cav": ALPHA_CAV, "area_S": AREA, **cav})
    kw = dict(cavity=cavity, omega_0=OMEGA_0, rabi=RABI, n_mol=N_MOL)
    kw.update(overrides)
    return PolaritonSetup(**kw)


def melppp_net() -> LowFreqNet:
    """Quoted net parameters of the film (reference A1, A2, not re-extracted)."""
    return LowFreqNet(GAMMA_INHOM, A1_QUOTED, A2_QUOTED, OMEGA_M)
