"""Run configuration: a TOML document with unit-suffixed keys.

Every energy key carries its unit in the name (``omega_0_eV``,
``gamma_inhom_meV``, ``omega_M_cm1``); temperatures end in ``_K``. Unknown
sections or keys are rejected with the line they appear on.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .units import to_meV

ENERGY_UNITS = {"meV": "meV", "eV": "eV", "cm1": "cm-1"}

# kinds: energy (unit suffix), T (kelvin), number, int, str, bool, modes, sweep
SCHEMA = {
    "molecule": {
        "omega_0": "energy", "gamma_inhom": "energy", "omega_M": "energy",
        "gamma_diss": "energy", "modes": "modes", "model": "str",
        "grid_step": "energy", "temperatures": "T_list",
    },
    "cavity": {
        "omega_cav0": "energy", "alpha_cav_meV_um2": "number", "area_um2": "number",
        "rabi": "energy", "n_mol": "number", "k_max_um": "number", "k_points": "int",
    },
    "net": {
        "gamma_inhom": "energy", "A1": "energy", "A2_meV2": "number", "omega_M": "energy",
        "file": "str", "fit_model": "str", "plateau_model": "str", "curvature": "bool",
    },
    "rates": {
        "T": "T", "method": "str", "direction": "str", "density": "str", "mixing": "str",
        "k_um": "number", "k_prime_um": "number",
        "map_rabi": "energy_sweep", "map_omega_low0": "energy_sweep",
        "ratevt_T": "T_sweep", "ratevt_k_um": "sweep",
    },
    "simulation": {
        "gamma_therm": "energy", "T": "T", "n_modes": "int", "k_max_um": "number",
        "gamma_cav": "energy", "gamma_exc": "energy", "omega_vib": "energy",
        "gamma_vib": "energy", "g": "energy", "gamma0": "energy",
        "pump_amplitude": "number", "pump_P_over_Pth": "number", "pump_t0_ps": "number",
        "pump_fwhm_fs": "number", "seed_amplitude": "number", "seed_k_um": "number",
        "seed_sigma_um": "number", "seed_t0_ps": "number", "seed_fwhm_fs": "number",
        "dt_fs": "number", "t_end_ps": "number", "save_stride": "int",
        "thermalization": "str", "threshold_lo": "number", "threshold_hi": "number",
    },
    "output": {"svg": "bool", "prefix": "str"},
}


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", s)
        if m:
            current = m.group(1)
            if section is not None and key is None and current == section:
                return n
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return n
    return None


def _where(text, section, key=None) -> str:
    n = _line_of(text, section, key)
    return f"line {n}: " if n else ""


def _split_key(key: str, kind: str):
    if kind.startswith("energy") or kind == "modes":
        for suffix, unit in ENERGY_UNITS.items():
            if key.endswith("_" + suffix):
                return key[: -len(suffix) - 1], unit
        return None, None
    if kind.startswith("T"):
        return (key[:-2], "K") if key.endswith("_K") else (None, None)
    return key, None


def _sweep_values(value, what: str) -> np.ndarray:
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num"}
        if extra or not {"start", "stop", "num"} <= set(value):
            raise ConfigurationError(f"{what}: sweep table needs exactly start, stop, num")
        return np.linspace(float(value["start"]), float(value["stop"]), int(value["num"]))
    if isinstance(value, list) and value:
        return np.array([float(v) for v in value])
    raise ConfigurationError(f"{what}: expected a list of values or {{start, stop, num}}")


def _convert(value, kind: str, unit: str | None, what: str):
    try:
        if kind == "energy":
            return float(to_meV(float(value), unit))
        if kind == "energy_sweep":
            return to_meV(_sweep_values(value, what), unit)
        if kind in ("T", "number"):
            return float(value)
        if kind in ("T_list", "T_sweep", "sweep"):
            return _sweep_values(value, what)
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError("not an integer")
            return int(value)
        if kind == "str":
            if not isinstance(value, str):
                raise ValueError("not a string")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError("not a boolean")
            return value
        if kind == "modes":
            rows = [(float(to_meV(float(w), unit)), float(s)) for w, s in value]
            return tuple(rows)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{what}: bad value {value!r} ({exc})") from None
    raise AssertionError(kind)


@dataclass
class RunConfig:
    """Parsed document: section -> canonical key -> value in meV / K / plain units."""

    sections: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    source: str = "<string>"

    def has(self, section: str) -> bool:
        return section in self.sections

    def section(self, name: str, command: str = "") -> dict:
        if name not in self.sections:
            cmd = f" for '{command}'" if command else ""
            raise ConfigurationError(f"{self.source}: missing required section [{name}]{cmd}")
        return self.sections[name]

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse and validate a configuration document."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    sections = {}
    for name, body in raw.items():
        if name not in SCHEMA or not isinstance(body, dict):
            raise ConfigurationError(f"{source}: {_where(text, name)}unknown section [{name}]")
        schema = SCHEMA[name]
        out = {}
        for key, value in body.items():
            match = None
            for base, kind in schema.items():
                stem, unit = _split_key(key, kind)
                if stem == base:
                    match = (base, kind, unit)
                    break
            if match is None:
                raise ConfigurationError(
                    f"{source}: {_where(text, name, key)}unknown key '{key}' in [{name}]"
                    + (" (energies need a _meV, _eV or _cm1 suffix, temperatures _K)"
                       if any(key == b for b in schema) else ""))
            base, kind, unit = match
            if base in out:
                raise ConfigurationError(f"{source}: {_where(text, name, key)}'{base}' given twice in [{name}]")
            out[base] = _convert(value, kind, unit, f"{source}: {_where(text, name, key)}[{name}] {key}")
        sections[name] = out
    return RunConfig(sections, raw, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def bundled_config(name: str = "melppp.toml") -> RunConfig:
    text = resources.files("polatherm").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return parse_config(text, f"<bundled {name}>")
