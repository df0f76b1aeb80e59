"""One-variable-at-a-time design sweeps.

A sweep varies one geometry field over a list of values, evaluates PTE on a
frequency grid for each, and reports the resonance (peak) of every curve.
In ``matched-per-point`` mode both L-sections are re-synthesized at every
grid frequency, so each curve is the matched PTE; ``fixed-refs`` reports the
bare channel between the source and load impedances.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from html import escape
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import channel as ch
from .config import ConfigError, check_keys, parse_sections, to_float
from .dielectric import MaterialDb, default_materials
from .matching import LoadModel, load_impedance, match_link
from .network import CONVENTION, PortImpedances, abcd_to_s, pte

SWEEPABLE = ("d_h", "d_v", "d_tx", "t_tx", "h_tx", "r_rx", "h_implant", "theta")
MATCH_MODES = ("matched-per-point", "fixed-refs")
BUILTIN_STACKS = {"layered": "layered.stack", "muscle": "muscle.stack"}


class SweepError(RuntimeError):
    def __init__(self, value: float, f: float | None, cause: Exception):
        self.value, self.f, self.cause = value, f, cause
        where = f"value {value!r}" + (f", f = {f!r} Hz" if f is not None else "")
        super().__init__(f"sweep point {where}: {cause}")


@dataclass(frozen=True)
class FrequencyGrid:
    f_min: float = 0.1e9
    f_max: float = 3e9
    n_points: int = 291
    spacing: str = "linear"

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError("need 0 < f_min < f_max")
        if self.n_points < 2:
            raise ValueError("frequency grid needs at least 2 points")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"spacing must be linear or log, got {self.spacing!r}")

    def points(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.f_min, self.f_max, self.n_points)
        return np.linspace(self.f_min, self.f_max, self.n_points)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]
    base: ch.LinkGeometry = ch.LinkGeometry()
    stack: ch.TissueLayerStack = field(default_factory=ch.layered_stack)
    stack_name: str = "layered"
    grid: FrequencyGrid = FrequencyGrid()
    load: LoadModel = LoadModel(50.0)
    match_mode: str = "matched-per-point"
    z_source: float = 50.0

    def __post_init__(self):
        if self.variable not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.variable!r}; choose from {', '.join(SWEEPABLE)}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if list(self.values) != sorted(self.values):
            raise ValueError("sweep values must be sorted")
        if self.match_mode not in MATCH_MODES:
            raise ValueError(f"match_mode must be one of {MATCH_MODES}")
        for v in self.values:
            self.geometry(v)

    def geometry(self, value: float) -> ch.LinkGeometry:
        return self.base.with_value(self.variable, value)

    def echo(self) -> list[str]:
        load = f"{self.load.r!r}" + (f",{self.load.c!r}" if self.load.c is not None else "")
        stack = ";".join(f"{m}:{t!r}" for m, t in self.stack.layers)
        base = ",".join(f"{k}={getattr(self.base, k)!r}" for k in self.base.__dataclass_fields__)
        return [
            f"variable={self.variable}",
            f"values={','.join(repr(v) for v in self.values)}",
            f"base={base}",
            f"stack={self.stack_name}[{stack}]",
            f"grid={self.grid.f_min!r},{self.grid.f_max!r},{self.grid.n_points},{self.grid.spacing}",
            f"load={load}",
            f"z_source={self.z_source!r}",
            f"match_mode={self.match_mode}",
            f"convention={CONVENTION}",
        ]


@dataclass(frozen=True)
class SweepCurve:
    value: float
    freqs: tuple[float, ...]
    pte: tuple[float, ...]

    @property
    def peak(self) -> tuple[float, float]:
        return find_resonance(list(zip(self.freqs, self.pte)))

    @property
    def f_peak(self) -> float:
        return self.peak[0]

    @property
    def pte_peak(self) -> float:
        return self.peak[1]


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    curves: tuple[SweepCurve, ...]
    material_hash: str | None

    def provenance(self) -> list[str]:
        return self.spec.echo() + [f"materials_sha256={self.material_hash or 'unknown'}"]


def find_resonance(curve: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Global maximum of a (f, pte) curve; equal maxima resolve to the lowest f."""
    if len(curve) < 1:
        raise ValueError("empty curve")
    pts = sorted(curve, key=lambda p: p[0])
    best = max(range(len(pts)), key=lambda i: (pts[i][1], -i))
    return pts[best]


def _curve(spec: SweepSpec, db: MaterialDb, value: float) -> SweepCurve:
    geom = spec.geometry(value)
    freqs = spec.grid.points()
    out = []
    for f in freqs:
        f = float(f)
        try:
            t = ch.channel_two_port(geom, spec.stack, db, f)
            zl = load_impedance(spec.load, f)
            if spec.match_mode == "matched-per-point":
                out.append(match_link(t, zl, spec.z_source).matched_pte)
            else:
                out.append(pte(abcd_to_s(t, PortImpedances(spec.z_source, zl))))
        except (ArithmeticError, ValueError, KeyError) as exc:
            raise SweepError(value, f, exc) from exc
    return SweepCurve(value, tuple(float(f) for f in freqs), tuple(out))


def _curve_job(args):
    return _curve(*args)


def run_sweep(spec: SweepSpec, db: MaterialDb | None = None, workers: int | None = None) -> SweepResult:
    """Evaluate every sweep value; ``workers > 1`` spreads values over processes.

    Results are merged in spec order, so serial and parallel runs agree.
    """
    db = default_materials() if db is None else db
    try:
        spec.stack.check(spec.base, db)
    except (ValueError, KeyError) as exc:
        raise SweepError(spec.values[0], None, exc) from exc
    jobs = [(spec, db, v) for v in spec.values]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(_curve_job, jobs))
    else:
        curves = [_curve_job(j) for j in jobs]
    return SweepResult(spec, tuple(curves), db.source_hash)


def emit_csv(result: SweepResult) -> str:
    if not result.curves or any(len(c.freqs) == 0 for c in result.curves):
        raise ValueError("nothing to emit: empty series")
    buf = io.StringIO()
    buf.write("# provenance\n")
    for line in result.provenance():
        buf.write(f"# {line}\n")
    buf.write("swept_value,f_hz,pte_pct\n")
    for c in result.curves:
        for f, p in zip(c.freqs, c.pte):
            buf.write(f"{c.value!r},{f!r},{p!r}\n")
    return buf.getvalue()


def peaks_csv(result: SweepResult) -> str:
    lines = ["swept_value,f_peak_hz,pte_peak_pct"]
    lines += [f"{c.value!r},{c.f_peak!r},{c.pte_peak!r}" for c in result.curves]
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def emit_svg(result: SweepResult, width: int = 640, height: int = 400) -> str:
    """Multi-series line chart, PTE (%) against f (GHz)."""
    if not result.curves or any(len(c.freqs) < 2 for c in result.curves):
        raise ValueError("every series needs at least 2 points")
    left, right, top, bottom = 60, 140, 20, 50
    pw, ph = width - left - right, height - top - bottom
    f_lo = min(c.freqs[0] for c in result.curves) / 1e9
    f_hi = max(c.freqs[-1] for c in result.curves) / 1e9
    y_hi = max(max(c.pte) for c in result.curves) or 1.0

    def xy(f, p):
        x = left + (f / 1e9 - f_lo) / (f_hi - f_lo) * pw
        y = top + ph - p / y_hi * ph
        return f"{x:.2f},{y:.2f}"

    var = result.spec.variable
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(5):
        fx = f_lo + (f_hi - f_lo) * k / 4
        x = left + pw * k / 4
        out.append(f'<text x="{x:.2f}" y="{top + ph + 15}" text-anchor="middle">{fx:.2f}</text>')
        py = y_hi * k / 4
        y = top + ph - ph * k / 4
        out.append(f'<text x="{left - 5}" y="{y + 4:.2f}" text-anchor="end">{py:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">f (GHz)</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.2f})">PTE (%)</text>')
    for i, c in enumerate(result.curves):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(xy(f, p) for f, p in zip(c.freqs, c.pte))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(var)} = {c.value:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def builtin_stack(name: str) -> ch.TissueLayerStack:
    return ch.load_stack(resources.files("bcplink.data").joinpath(BUILTIN_STACKS[name]).read_text())


def resolve_stack(ref: str, base_dir: Path | None = None) -> ch.TissueLayerStack:
    """A built-in stack name or a stack file path (relative to ``base_dir``)."""
    if ref in BUILTIN_STACKS:
        return builtin_stack(ref)
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return ch.load_stack(path.read_text())


_SWEEP_KEYS = {"variable", "values", "stack", "f_min", "f_max", "n_points", "spacing", "load",
               "match_mode", "z_source"}


def load_sweep_spec(text: str, base_dir: Path | None = None) -> SweepSpec:
    """Parse a ``[sweep]`` file with an optional ``[geometry]`` section for the base design."""
    sections = parse_sections(text)
    sweeps = [s for s in sections if s.kind == "sweep"]
    if len(sweeps) != 1:
        raise ConfigError("sweep file needs exactly one [sweep] section", sweeps[1].line if sweeps else None)
    for s in sections:
        if s.kind not in ("sweep", "geometry"):
            raise ConfigError(f"unexpected section [{s.kind}]", s.line)
    sec = sweeps[0]
    check_keys(sec, _SWEEP_KEYS)

    def get(key, default=None):
        e = sec.single(key, required=default is None)
        return e if e is not None else default

    var_e = get("variable")
    values_e = get("values")
    try:
        values = tuple(float(v) for v in values_e.value.split(","))
    except ValueError:
        raise ConfigError(f"values: expected comma-separated numbers, got {values_e.value!r}", values_e.line) from None

    base = ch.LinkGeometry()
    geo = [s for s in sections if s.kind == "geometry"]
    if len(geo) > 1:
        raise ConfigError("more than one [geometry] section", geo[1].line)
    if geo:
        check_keys(geo[0], set(ch.LinkGeometry.__dataclass_fields__))
        try:
            base = ch.LinkGeometry(**{e.key: to_float(e) for e in geo[0].entries})
        except ch.GeometryError as exc:
            raise ConfigError(str(exc), geo[0].line) from None

    stack_e = sec.single("stack", required=False)
    stack_name = stack_e.value if stack_e else "layered"
    try:
        stack = resolve_stack(stack_name, base_dir)
    except OSError as exc:
        raise ConfigError(f"stack: cannot read {stack_name!r}: {exc.strerror}", stack_e.line) from None

    grid_kw = {}
    for key in ("f_min", "f_max"):
        e = sec.single(key, required=False)
        if e:
            grid_kw[key] = to_float(e)
    e = sec.single("n_points", required=False)
    if e:
        try:
            grid_kw["n_points"] = int(e.value)
        except ValueError:
            raise ConfigError(f"n_points: expected an integer, got {e.value!r}", e.line) from None
    e = sec.single("spacing", required=False)
    if e:
        grid_kw["spacing"] = e.value

    load = LoadModel(50.0)
    e = sec.single("load", required=False)
    if e:
        parts = [p.strip() for p in e.value.split(",")]
        try:
            nums = [float(p) for p in parts]
            if len(nums) not in (1, 2):
                raise ValueError
            load = LoadModel(*nums)
        except ValueError:
            raise ConfigError(f"load: expected R or R, C with R > 0, C > 0, got {e.value!r}", e.line) from None
    e = sec.single("match_mode", required=False)
    mode = e.value if e else "matched-per-point"
    e = sec.single("z_source", required=False)
    z_source = to_float(e) if e else 50.0

    try:
        return SweepSpec(var_e.value, values, base, stack, stack_name, FrequencyGrid(**grid_kw), load, mode, z_source)
    except ValueError as exc:
        raise ConfigError(str(exc), sec.line) from None
