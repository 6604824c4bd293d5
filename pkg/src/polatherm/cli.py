"""Command-line front end.

    polatherm <command> [--config PATH] [--out DIR] [--T 300K] [--seed N] [--threads N]

Commands: spectra, extract, dispersion, rates, map, ratevt, simulate,
threshold, reproduce {fig1..fig5}. Without ``--config`` the bundled MeLPPP
parameter set is used. Exit codes: 0 success, 1 domain or numerical error,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import condensim as cs
from . import extraction as ex
from . import io
from . import polariton as pol
from . import rates as rt
from . import spectra as sp
from .config import RunConfig, bundled_config, load_config
from .errors import ConfigurationError, PolathermError
from .units import HBAR, ensure_temperature, from_meV, kT

FIG5_SEED_AMPLITUDE = 1e4


class UsageError(Exception):
    pass


# --- config -> domain objects ----------------------------------------------

def _require(sec: dict, key: str, section: str):
    if key not in sec:
        raise ConfigurationError(f"[{section}] is missing '{key}'")
    return sec[key]


def molecule_from(cfg: RunConfig, command: str) -> sp.MolecularSystem:
    m = cfg.section("molecule", command)
    modes = tuple(sp.VibrationalMode(w, s) for w, s in m.get("modes", ()))
    return sp.MolecularSystem(_require(m, "omega_0", "molecule"), _require(m, "gamma_inhom", "molecule"),
                              modes, m.get("omega_M"), m.get("gamma_diss", 0.0))


def setup_from(cfg: RunConfig, command: str) -> pol.PolaritonSetup:
    c = cfg.section("cavity", command)
    cav = pol.CavityConfig(_require(c, "omega_cav0", "cavity"), _require(c, "alpha_cav_meV_um2", "cavity"),
                           _require(c, "area_um2", "cavity"))
    omega_0 = cfg.get("molecule", "omega_0")
    if omega_0 is None:
        raise ConfigurationError(f"'{command}' needs [molecule] omega_0 for the exciton energy")
    return pol.PolaritonSetup(cav, omega_0, _require(c, "rabi", "cavity"), _require(c, "n_mol", "cavity"))


def net_from(cfg: RunConfig, command: str) -> ex.LowFreqNet:
    n = cfg.section("net", command)
    if "file" in n:
        return io.read_net(n["file"])
    missing = [k for k in ("gamma_inhom", "A1", "A2_meV2", "omega_M") if k not in n]
    if missing:
        raise ConfigurationError(f"[net] needs gamma_inhom, A1, A2_meV2 and omega_M (or file); missing {missing}")
    return ex.LowFreqNet(n["gamma_inhom"], n["A1"], n["A2_meV2"], n["omega_M"])


def grid_from(cfg: RunConfig, setup: pol.PolaritonSetup) -> cs.ModeGrid:
    s = cfg.section("simulation", "simulate")
    return cs.build_mode_grid(setup, s.get("n_modes", 31), s.get("k_max_um", 3.0),
                              s.get("gamma_cav", 4.4), s.get("gamma_exc", 60.0))


def sim_config_from(cfg: RunConfig, setup: pol.PolaritonSetup, T: float | None,
                    command: str) -> cs.SimConfig:
    s = cfg.section("simulation", command)
    grid = grid_from(cfg, setup)
    T = s.get("T", 300.0) if T is None else T
    scatter = cs.ScatterParams(s.get("omega_vib", 199.0), s.get("gamma_vib", 2.5), s.get("g", 0.5),
                               s.get("gamma0"))
    pump = cs.Pulse(s.get("pump_amplitude", 0.0), s.get("pump_t0_ps", 1.0), s.get("pump_fwhm_fs", 200.0) * 1e-3)
    seed = cs.Seed(s.get("seed_amplitude", 0.0), s.get("seed_t0_ps", 1.0), s.get("seed_fwhm_fs", 200.0) * 1e-3,
                   s.get("seed_k_um", 2.55), s.get("seed_sigma_um", 0.2))
    kind = s.get("thermalization", "constant")
    if kind == "constant":
        therm = None
    elif kind == "microscopic":
        therm = cs.microscopic_thermalization_matrix(grid, setup, net_from(cfg, command), T)
    else:
        raise ConfigurationError(f"[simulation] thermalization must be 'constant' or 'microscopic', got {kind!r}")
    return cs.SimConfig(grid, s.get("gamma_therm", 5e-7), T, pump, seed, scatter,
                        dt=s.get("dt_fs", 0.5) * 1e-3, t_end=s.get("t_end_ps", 10.0),
                        save_stride=s.get("save_stride", 20), therm=therm)


def parse_temperature(text: str) -> float:
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*(K)?\s*", text)
    if not m:
        raise UsageError(f"--T expects a temperature such as 300 or 300K, got {text!r}")
    try:
        return ensure_temperature(float(m.group(1)))
    except ValueError:
        raise UsageError(f"--T expects a temperature such as 300 or 300K, got {text!r}") from None


# --- helpers ---------------------------------------------------------------

class Context:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.T = parse_temperature(args.T) if args.T is not None else None
        self.svg = bool(cfg.get("output", "svg", False))
        self.prefix = cfg.get("output", "prefix", "")
        self.written: list[Path] = []

    def meta(self, **extra) -> dict:
        info = {"polatherm_version": __version__, "command": self.args.command,
                "seed": self.args.seed, "config_source": self.cfg.source, "config": self.cfg.raw}
        if self.T is not None:
            info["T_K"] = self.T
        info.update(extra)
        return info

    def path(self, name: str) -> Path:
        return self.out / f"{self.prefix}{name}"

    def csv(self, name, columns, rows, **extra):
        self.written.append(io.write_csv(self.path(name), columns, rows, self.meta(**extra)))

    def matrix(self, name, row_name, rows, col_name, cols, mat, **extra):
        self.written.append(io.write_matrix_csv(self.path(name), row_name, rows, col_name, cols, mat,
                                                self.meta(**extra)))

    def note(self, path):
        self.written.append(path)


def _temps(ctx: Context, default=None) -> list[float]:
    if ctx.T is not None:
        return [ctx.T]
    temps = ctx.cfg.get("molecule", "temperatures", default)
    if temps is None:
        raise ConfigurationError("no temperature given: pass --T or set [molecule] temperatures_K")
    return [float(t) for t in temps]


def _tag(T: float) -> str:
    return f"{T:g}K"


# --- commands --------------------------------------------------------------

def cmd_spectra(ctx: Context, models=None):
    system = molecule_from(ctx.cfg, "spectra")
    models = models or [ctx.cfg.get("molecule", "model", "exact")]
    step = ctx.cfg.get("molecule", "grid_step", sp.GRID_STEP)
    for T in _temps(ctx, [300.0]):
        grid = sp.adequate_grid(system, T, step=step)
        for model in models:
            em, ab = sp.spectrum_pair(system, T, grid, model)
            for curve in (em, ab):
                name = f"{curve.kind}_{model}_{_tag(T)}.csv"
                ctx.note(io.write_curve_csv(ctx.path(name), curve, ctx.meta(model=model)))
            if ctx.svg:
                ctx.note(io.svg_lines(ctx.path(f"spectra_{model}_{_tag(T)}.svg"),
                                      {"emission": (em.grid * 1e-3, em.intensity * 1e3),
                                       "absorption": (ab.grid * 1e-3, ab.intensity * 1e3)},
                                      f"{model} spectra at {T:g} K", "energy (eV)", "intensity (1/eV)"))


def _series_from_files(paths) -> list:
    by_T: dict = {}
    for p in paths:
        curve = io.read_curve_csv(p)
        by_T.setdefault(curve.temperature, {})[curve.kind] = curve
    series = []
    for T, pair in sorted(by_T.items()):
        if set(pair) != {"emission", "absorption"}:
            raise ConfigurationError(f"T = {T:g} K: need one emission and one absorption file")
        series.append((T, pair["emission"], pair["absorption"]))
    return series


def _synthetic_series(ctx: Context, system: sp.MolecularSystem) -> list:
    model = ctx.cfg.get("molecule", "model", "exact")
    step = ctx.cfg.get("molecule", "grid_step", sp.GRID_STEP)
    temps = ctx.cfg.get("molecule", "temperatures")
    if temps is None:
        raise ConfigurationError("extract needs [molecule] temperatures_K or --input files")
    out = []
    for T in temps:
        em, ab = sp.spectrum_pair(system, float(T), sp.adequate_grid(system, float(T), step=step), model)
        out.append((float(T), em, ab))
    return out


def cmd_extract(ctx: Context):
    n = ctx.cfg.get("net", "omega_M")
    if ctx.args.input:
        series = _series_from_files(ctx.args.input)
        omega_M = n if n is not None else ctx.cfg.get("molecule", "omega_M")
    else:
        system = molecule_from(ctx.cfg, "extract")
        series = _synthetic_series(ctx, system)
        omega_M = n if n is not None else system.omega_M
    if omega_M is None:
        raise ConfigurationError("extract needs omega_M in [net] or [molecule]")
    opts = ctx.cfg.sections.get("net", {})
    res = ex.extract_net(series, omega_M, model=opts.get("fit_model", "skewed"),
                         plateau_model=opts.get("plateau_model"), curvature=opts.get("curvature", False),
                         detailed=True)
    _write_extraction(ctx, res)
    print(res.net.to_text(), end="")


def _write_extraction(ctx: Context, res: ex.NetExtraction):
    pts = res.points
    ctx.csv("stokes_vs_T.csv", ["T_K", "stokes_meV", "emission_center_meV", "absorption_center_meV"],
            [(p.T, p.stokes, p.emission.center, p.absorption.center) for p in pts])
    fit = res.net.gamma_inhom ** 2 + res.slope * np.array([kT(p.T) for p in pts])
    ctx.csv("linewidth_vs_T.csv", ["T_K", "kT_meV", "gamma_em_meV", "gamma_em_sq_meV2", "high_T_fit_meV2"],
            [(p.T, kT(p.T), p.emission.sigma, p.variance, f) for p, f in zip(pts, fit)],
            slope_meV=res.slope, plateau_meV2=res.plateau, warnings=list(res.warnings))
    ctx.note(io.write_net(ctx.path("net.txt"), res.net))
    if ctx.svg:
        T = [p.T for p in pts]
        ctx.note(io.svg_lines(ctx.path("stokes_vs_T.svg"), {"Stokes shift": (T, [p.stokes for p in pts])},
                              "Stokes shift", "T (K)", "meV"))
        ctx.note(io.svg_lines(ctx.path("linewidth_vs_T.svg"),
                              {"Gamma_em^2": (T, [p.variance for p in pts]), "high-T law": (T, fit)},
                              "0-0 emission variance", "T (K)", "meV^2"))


def cmd_dispersion(ctx: Context):
    setup = setup_from(ctx.cfg, "dispersion")
    c = ctx.cfg.section("cavity")
    k = np.linspace(0.0, c.get("k_max_um", 3.0), c.get("k_points", 61))
    low, up = pol.branch_energies(setup, k)
    ctx.csv("dispersion.csv", ["k_per_um", "omega_low_meV", "omega_up_meV", "sin2phi"],
            zip(k, low, up, pol.exciton_fraction(setup, k)),
            alpha_pol_meV_um2=pol.alpha_pol(setup), delta_omega_min_meV=pol.delta_omega_min(setup))
    if ctx.svg:
        ctx.note(io.svg_lines(ctx.path("dispersion.svg"), {"lower": (k, low), "upper": (k, up)},
                              "polariton branches", "k (1/um)", "energy (meV)"))


def _rate_T(ctx: Context) -> float:
    return ctx.T if ctx.T is not None else ctx.cfg.section("rates", "rates").get("T", 300.0)


def cmd_rates(ctx: Context):
    setup, net = setup_from(ctx.cfg, "rates"), net_from(ctx.cfg, "rates")
    r = ctx.cfg.section("rates", "rates")
    T = _rate_T(ctx)
    sd = rt.SpectralDensityModel(r.get("density", "flat_A2"), net)
    pair = rt.therm_rate_pair(setup, sd, r.get("k_um", 0.5), r.get("k_prime_um", 0.0), T, r.get("mixing", "exact"))
    rows = [("gamma_down", pair.gamma_down), ("gamma_up", pair.gamma_up)]
    ctx.csv("rates.csv", ["quantity", "energy_eV", "rate_per_ps"],
            [(name, from_meV(v, "eV"), v / HBAR) for name, v in rows],
            delta_omega_meV=pair.delta_omega, out_of_band=pair.out_of_band, T_used_K=T)
    for name, v in rows:
        print(f"{name} = {from_meV(v, 'eV'):.6g} eV ({v / HBAR:.6g} 1/ps)")


def cmd_map(ctx: Context):
    setup, net = setup_from(ctx.cfg, "map"), net_from(ctx.cfg, "map")
    r = ctx.cfg.section("rates", "map")
    rabi, w0 = _require(r, "map_rabi", "rates"), _require(r, "map_omega_low0", "rates")
    T = _rate_T(ctx)
    mat = rt.rate_map(setup, net, rabi, w0, T, r.get("method", "low_T"), r.get("direction", "up"))
    ctx.matrix("rate_map.csv", "omega_low0_eV", w0 * 1e-3, "rabi_meV", rabi, from_meV(mat, "eV"),
               units="thermalization rate in eV", T_used_K=T)
    if ctx.svg:
        ctx.note(io.svg_heatmap(ctx.path("rate_map.svg"), rabi, w0 * 1e-3, from_meV(mat, "eV"),
                                f"thermalization rate (eV) at {T:g} K", "Rabi energy (meV)",
                                "omega_low(0) (eV)"))


def cmd_ratevt(ctx: Context):
    setup, net = setup_from(ctx.cfg, "ratevt"), net_from(ctx.cfg, "ratevt")
    r = ctx.cfg.section("rates", "ratevt")
    T = _require(r, "ratevt_T", "rates")
    k = _require(r, "ratevt_k_um", "rates")
    res = rt.rate_vs_temperature(setup, net, k, T, r.get("method", "low_T"))
    ctx.matrix("ratevt_up.csv", "k_per_um", k, "T_K", T, from_meV(res.gamma_up, "eV"),
               units="uphill rate from k'=0 in eV")
    ctx.matrix("ratevt_down.csv", "k_per_um", k, "T_K", T, from_meV(res.gamma_down, "eV"),
               units="downhill rate to k'=0 in eV")
    ctx.csv("ratevt_nearest.csv", ["T_K", "gamma_nearest_eV", "thermalization_length"],
            zip(T, from_meV(res.gamma_nearest, "eV"), res.thermalization_length()))
    if ctx.svg:
        ctx.note(io.svg_heatmap(ctx.path("ratevt_up.svg"), T, k, from_meV(res.gamma_up, "eV"),
                                "uphill rate from k' = 0 (eV)", "T (K)", "k (1/um)"))


def _resolve_pump(ctx: Context, config: cs.SimConfig) -> tuple[cs.SimConfig, dict]:
    s = ctx.cfg.section("simulation", "simulate")
    if "pump_amplitude" in s and "pump_P_over_Pth" in s:
        raise ConfigurationError("[simulation] give pump_amplitude or pump_P_over_Pth, not both")
    if "pump_P_over_Pth" not in s:
        return config, {}
    th = _threshold(ctx, config)
    amp = s["pump_P_over_Pth"] * th.P_th
    return config.with_(pump=replace(config.pump, amplitude=amp)), {"P_th": th.P_th, "pump_amplitude": amp}


def _threshold(ctx: Context, config: cs.SimConfig) -> cs.ThresholdResult:
    s = ctx.cfg.section("simulation", "threshold")
    # the threshold is defined without the seed pulse
    base = config.with_(seed=replace(config.seed, amplitude=0.0))
    return cs.find_threshold(base, s.get("threshold_lo", 1e3), s.get("threshold_hi", 1e8),
                             threads=ctx.args.threads)


def _write_run(ctx: Context, traj: cs.SimTrajectory, tag: str, **extra):
    N = traj.grid.size
    ctx.csv(f"trajectory{tag}.csv", ["t_ps", "n_P"] + [f"n_{i}" for i in range(N)],
            (np.concatenate(([t, p], n)) for t, p, n in zip(traj.times, traj.n_P, traj.n)), **extra)
    ek = cs.ek_distribution(traj, integrated=True)
    final = cs.ek_distribution(traj)
    ctx.csv(f"ek_distribution{tag}.csv",
            ["k_per_um", "omega_meV", "degeneracy", "integrated_per_state_ps", "final_per_state"],
            zip(ek[:, 0], ek[:, 1], traj.grid.D, ek[:, 2], final[:, 2]), **extra)
    if ctx.svg:
        ctx.note(io.svg_ek(ctx.path(f"ek_distribution{tag}.svg"), ek[:, 0], ek[:, 1], ek[:, 2],
                           "time-integrated occupation per state"))


def cmd_simulate(ctx: Context):
    setup = setup_from(ctx.cfg, "simulate")
    config = sim_config_from(ctx.cfg, setup, ctx.T, "simulate")
    config, extra = _resolve_pump(ctx, config)
    traj = cs.simulate(config)
    _write_run(ctx, traj, "", **extra)
    print(f"peak n0 = {traj.n[:, 0].max():.6g}; argmax mode = "
          f"{int(np.argmax(cs.ek_distribution(traj, integrated=True)[:, 2]))}")


def cmd_threshold(ctx: Context):
    setup = setup_from(ctx.cfg, "threshold")
    config = sim_config_from(ctx.cfg, setup, ctx.T, "threshold")
    th = _threshold(ctx, config)
    ctx.csv("threshold_scan.csv", ["pump_amplitude", "peak_n0"], th.scan, P_th=th.P_th, sharpness=th.sharpness)
    print(f"P_th = {th.P_th:.6g} (knee slope d ln n0 / d ln P = {th.sharpness:.3g})")


def reproduce(ctx: Context, figure: str):
    ctx.cfg = bundled_config() if ctx.args.config is None else ctx.cfg
    if figure == "fig1":
        temps = [ctx.T] if ctx.T is not None else [6.0, 300.0]
        system = molecule_from(ctx.cfg, "reproduce fig1")
        for T in temps:
            grid = sp.adequate_grid(system, T)
            cols, data = ["energy_eV"], [grid * 1e-3]
            curves = {"exact": system, "reduced": system, "high_only": system.without_low_modes()}
            for label, sysm in curves.items():
                model = "reduced" if label == "reduced" else "exact"
                em, ab = sp.spectrum_pair(sysm, T, grid, model)
                cols += [f"emission_{label}_per_eV", f"absorption_{label}_per_eV"]
                data += [em.intensity * 1e3, ab.intensity * 1e3]
            ctx.csv(f"fig1_spectra_{_tag(T)}.csv", cols, zip(*data))
            if ctx.svg:
                ctx.note(io.svg_lines(ctx.path(f"fig1_spectra_{_tag(T)}.svg"),
                                      {c: (data[0], d) for c, d in zip(cols[1:], data[1:])},
                                      f"spectra at {T:g} K", "energy (eV)", "intensity (1/eV)"))
    elif figure == "fig2":
        ctx.prefix = ctx.prefix or "fig2_"
        system = molecule_from(ctx.cfg, "reproduce fig2")
        series = _synthetic_series(ctx, system)
        opts = ctx.cfg.sections.get("net", {})
        res = ex.extract_net(series, system.omega_M, model=opts.get("fit_model", "skewed"),
                             plateau_model=opts.get("plateau_model"), detailed=True)
        _write_extraction(ctx, res)
        T = np.array([p.T for p in res.points])
        eff = np.array([sp.effective_peak_params(system, t) for t in T])
        ctx.csv("reduced_vs_T.csv", ["T_K", "stokes_meV", "gamma_em_meV"],
                zip(T, eff[:, 1] - eff[:, 0], eff[:, 2]), model="reduced closed form")
        print(res.net.to_text(), end="")
    elif figure == "fig3":
        ctx.prefix = ctx.prefix or "fig3_"
        cmd_map(ctx)
    elif figure == "fig4":
        ctx.prefix = ctx.prefix or "fig4_"
        cmd_ratevt(ctx)
    elif figure == "fig5":
        ctx.prefix = ctx.prefix or "fig5_"
        setup = setup_from(ctx.cfg, "reproduce fig5")
        config = sim_config_from(ctx.cfg, setup, ctx.T, "reproduce fig5")
        config, extra = _resolve_pump(ctx, config)
        if config.pump.amplitude == 0:
            raise ConfigurationError("[simulation] needs pump_amplitude or pump_P_over_Pth for fig5")
        seed_amp = config.seed.amplitude or FIG5_SEED_AMPLITUDE
        ground, excited = cs.simulate_many(
            [config.with_(seed=replace(config.seed, amplitude=0.0)),
             config.with_(seed=replace(config.seed, amplitude=seed_amp))], ctx.args.threads)
        _write_run(ctx, ground, "_ground", **extra)
        _write_run(ctx, excited, "_seeded", seed_amplitude=seed_amp, **extra)
        for name, tr in (("ground", ground), ("seeded", excited)):
            ek = cs.ek_distribution(tr, integrated=True)
            i = int(np.argmax(ek[:, 2]))
            print(f"{name}: argmax k = {ek[i, 0]:.4g} 1/um (mode {i})")
    else:
        raise UsageError(f"unknown figure {figure!r}; choose fig1..fig5")


HELP = {
    "spectra": "emission/absorption spectra per temperature",
    "extract": "recover Gamma, A1, A2 from a spectral temperature series",
    "dispersion": "polariton branches and Hopfield fractions",
    "rates": "thermalization rates of one state pair",
    "map": "nearest-neighbour rate over (Rabi energy, ground-state energy)",
    "ratevt": "rates from k = 0 over (k, T)",
    "simulate": "rate-equation run with pump and seed pulses",
    "threshold": "condensation threshold by bisection on the pump",
}

COMMANDS = {"spectra": cmd_spectra, "extract": cmd_extract, "dispersion": cmd_dispersion,
            "rates": cmd_rates, "map": cmd_map, "ratevt": cmd_ratevt, "simulate": cmd_simulate,
            "threshold": cmd_threshold}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration (default: bundled MeLPPP set)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--T", metavar="TEMP", help="temperature override, e.g. 300K")
    common.add_argument("--seed", type=int, default=0, help="random seed (recorded in outputs)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for simulation batches")
    parser = _Parser(prog="polatherm", description="Vibronic spectra, polariton thermalization "
                     "rates and condensation kinetics.")
    parser.add_argument("--version", action="version", version=f"polatherm {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "extract":
            p.add_argument("--input", nargs="+", metavar="CSV",
                           help="spectrum CSVs (energy_eV, intensity_per_eV) instead of synthetic spectra")
    p = sub.add_parser("reproduce", parents=[common], help="regenerate a figure's data")
    p.add_argument("figure", choices=["fig1", "fig2", "fig3", "fig4", "fig5"])
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = load_config(args.config) if args.config else bundled_config()
        ctx = Context(args, cfg)
        if args.command == "reproduce":
            reproduce(ctx, args.figure)
        else:
            COMMANDS[args.command](ctx)
    except UsageError as exc:
        print(f"polatherm: usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"polatherm: configuration error: {exc}", file=sys.stderr)
        return 2
    except PolathermError as exc:
        print(f"polatherm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in ctx.written:
        print(f"wrote {path}")
    return 0


def main() -> None:
    sys.exit(run())
