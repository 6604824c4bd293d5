"""File formats: CSV tables with provenance headers, spectra, net records, SVG.

All writers go through `atomic_write` (temp file + rename) so an interrupted
run never leaves a half-written output behind.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from html import escape
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .extraction import LowFreqNet
from .spectra import SpectralCurve

FLOAT_FORMAT = ".12g"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, FLOAT_FORMAT)


def header_lines(meta: dict | None) -> list[str]:
    """Flatten a (possibly nested) mapping into ``# key = value`` comment lines."""
    out = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
        else:
            out.append(f"# {prefix} = {obj!r}" if isinstance(obj, str) else f"# {prefix} = {obj}")

    walk("", meta or {})
    return out


def csv_text(columns, rows, meta: dict | None = None) -> str:
    """RFC-4180 CSV preceded by ``#`` comment lines recording ``meta``."""
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    return atomic_write(path, csv_text(columns, rows, meta))


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Read a CSV written by `write_csv`: (header metadata, column names, data)."""
    meta, body = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    if not body:
        raise ConfigurationError(f"{path}: no column header found")
    reader = csv.reader(body)
    columns = next(reader)
    try:
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from None
    return meta, columns, data.reshape(-1, len(columns))


def write_matrix_csv(path, row_name: str, row_values, col_name: str, col_values, matrix,
                     meta: dict | None = None) -> Path:
    """Row-major matrix; the first column holds the row axis, the header the column axis."""
    cols = [f"{row_name}\\{col_name}"] + [_fmt(c) for c in col_values]
    rows = ([r, *m] for r, m in zip(row_values, np.asarray(matrix)))
    return write_csv(path, cols, rows, meta)


# --- spectra and net records -----------------------------------------------

def write_curve_csv(path, curve: SpectralCurve, meta: dict | None = None) -> Path:
    """Two columns, energy in eV and intensity per eV."""
    info = {"kind": curve.kind, "temperature_K": curve.temperature, **(meta or {})}
    rows = zip(curve.grid * 1e-3, curve.intensity * 1e3)
    return write_csv(path, ["energy_eV", "intensity_per_eV"], rows, info)


def read_curve_csv(path, kind: str | None = None, T: float | None = None) -> SpectralCurve:
    """Load a measured or synthetic spectrum in the `write_curve_csv` format.

    ``kind`` and ``T`` default to the header entries when present.
    """
    meta, columns, data = read_csv(path)
    if columns[:2] != ["energy_eV", "intensity_per_eV"]:
        raise ConfigurationError(f"{path}: expected columns energy_eV, intensity_per_eV")
    kind = kind or meta.get("kind", "").strip("'\"")
    if T is None:
        if "temperature_K" not in meta:
            raise ConfigurationError(f"{path}: temperature missing from header; pass T explicitly")
        T = float(meta["temperature_K"])
    order = np.argsort(data[:, 0])
    return SpectralCurve(data[order, 0] * 1e3, data[order, 1] * 1e-3, kind, float(T), {"source": str(path)})


def write_net(path, net: LowFreqNet) -> Path:
    return atomic_write(path, net.to_text())


def read_net(path) -> LowFreqNet:
    return LowFreqNet.from_text(Path(path).read_text(encoding="utf-8"))


# --- SVG -------------------------------------------------------------------

_W, _H, _PAD = 640, 440, 60
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _scale(lo, hi, a, b, log=False):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    span = (hi - lo) or 1.0

    def f(v):
        v = math.log10(v) if log else v
        return a + (v - lo) / span * (b - a)
    return f


def _frame(title, xlabel, ylabel, xr, yr):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<rect x="{_PAD}" y="{_PAD // 2}" width="{_W - 1.5 * _PAD}" height="{_H - 1.5 * _PAD}" '
             'fill="none" stroke="black"/>',
             f'<text x="{_W / 2}" y="18" text-anchor="middle">{escape(title)}</text>',
             f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="16" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 16 {_H / 2})">'
             f'{escape(ylabel)}</text>',
             f'<text x="{_PAD}" y="{_H - _PAD + 16}" text-anchor="middle">{xr[0]:.4g}</text>',
             f'<text x="{_W - _PAD / 2}" y="{_H - _PAD + 16}" text-anchor="middle">{xr[1]:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end">{yr[0]:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_PAD // 2 + 10}" text-anchor="end">{yr[1]:.4g}</text>']
    return parts


def svg_lines(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logy: bool = False) -> Path:
    """Line plot of ``{label: (x, y)}``."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ok = np.isfinite(ys) & (ys > 0 if logy else True)
    xr = (float(np.nanmin(xs)), float(np.nanmax(xs)))
    yr = (float(ys[ok].min()), float(ys[ok].max())) if ok.any() else (0.0, 1.0)
    fx = _scale(*xr, _PAD, _W - _PAD / 2)
    fy = _scale(*yr, _H - _PAD, _PAD // 2, log=logy)
    parts = _frame(title, xlabel, ylabel, xr, yr)
    for n, (label, (x, y)) in enumerate(series.items()):
        color = _PALETTE[n % len(_PALETTE)]
        pts = " ".join(f"{fx(a):.2f},{fy(b):.2f}" for a, b in zip(x, y)
                       if math.isfinite(b) and (b > 0 or not logy))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{_W - _PAD}" y="{_PAD // 2 + 16 * (n + 1)}" fill="{color}" '
                     f'text-anchor="end">{escape(str(label))}</text>')
    parts.append("</svg>\n")
    return atomic_write(path, "\n".join(parts))


def _color(t: float) -> str:
    # dark blue -> yellow ramp
    t = min(max(t, 0.0), 1.0)
    r, g, b = int(40 + 215 * t), int(20 + 210 * t), int(120 * (1 - t) + 40)
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_heatmap(path, x, y, z, title: str = "", xlabel: str = "", ylabel: str = "",
                log: bool = True) -> Path:
    """Heatmap of ``z[i, j]`` at row ``y[i]`` and column ``x[j]``."""
    z = np.asarray(z, float)
    vals = np.log10(np.where(z > 0, z, np.nan)) if log else z
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    xr, yr = (float(x[0]), float(x[-1])), (float(y[0]), float(y[-1]))
    parts = _frame(title, xlabel, ylabel, xr, yr)
    cw = (_W - 1.5 * _PAD) / len(x)
    ch = (_H - 1.5 * _PAD) / len(y)
    for i in range(len(y)):
        for j in range(len(x)):
            v = vals[i, j]
            fill = "#cccccc" if not math.isfinite(v) else _color((v - lo) / ((hi - lo) or 1.0))
            parts.append(f'<rect x="{_PAD + j * cw:.2f}" y="{_H - _PAD - (i + 1) * ch:.2f}" '
                         f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" fill="{fill}"/>')
    parts.append(f'<text x="{_W - _PAD / 2}" y="{_PAD // 2 - 4}" text-anchor="end">'
                 f'{"log10 " if log else ""}range {lo:.3g} .. {hi:.3g}</text>')
    parts.append("</svg>\n")
    return atomic_write(path, "\n".join(parts))


def svg_ek(path, k, omega, occupation, title: str = "") -> Path:
    """E,k occupation map: one marker per mode, colour on a log scale."""
    occ = np.asarray(occupation, float)
    pos = occ > 0
    lv = np.log10(np.where(pos, occ, np.nan))
    lo, hi = (float(np.nanmin(lv)), float(np.nanmax(lv))) if pos.any() else (0.0, 1.0)
    xr, yr = (float(np.min(k)), float(np.max(k))), (float(np.min(omega)), float(np.max(omega)))
    fx = _scale(*xr, _PAD + 8, _W - _PAD / 2 - 8)
    fy = _scale(*yr, _H - _PAD - 8, _PAD // 2 + 8)
    parts = _frame(title, "k (1/um)", "energy (meV)", xr, yr)
    for a, b, v in zip(k, omega, lv):
        fill = "#cccccc" if not math.isfinite(v) else _color((v - lo) / ((hi - lo) or 1.0))
        parts.append(f'<circle cx="{fx(a):.2f}" cy="{fy(b):.2f}" r="6" fill="{fill}" stroke="black"/>')
    parts.append("</svg>\n")
    return atomic_write(path, "\n".join(parts))
