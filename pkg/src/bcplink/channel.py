"""Equivalent-circuit two-port of the galvanic ring-to-implant link.

Current enters the tissue under one TX ring, descends to the implant depth,
runs axially past the implant and leaves under the other ring.  The ladder,
port 1 (TX rings) to port 2 (RX electrodes)::

    ring spreading -- leak shunt -- [radial descent + loop inductance]
        -- (1 - x) column -- x column (shunt, tapped) -- RX spreading

* ring spreading: ``2 / (4 sigma r_eq)`` with ``r_eq`` the radius of a disc
  whose area equals the ring contact area ``t_tx * 2 pi r_mean``.
* leak shunt: axial conduction, ring to ring, of the tissue above the implant
  that bypasses it; per crossed layer ``kappa * dt * w_leak / L_ax``.
* radial descent: two legs of ``dt / (kappa A_rad)`` per crossed layer, plus
  the inductance of the current loop closed through the implant region,
  ``mu0 * span * (depth + 0.7 mm) / (5 r_rx)``.
* column: axial R||C of the tissue column around the implant,
  ``L_ax / (kappa A_col)``; the implant taps a fraction ``x`` of it (span
  overlap with the ring gap, scaled by misalignment).
* RX spreading: ``2 / (4 sigma r_rx)``.

``kappa = sigma + j w eps0 eps'`` is the complex admittivity of the layer.
The ladder path runs along a diameter from the ring feed side, so depths past
the tissue axis keep crossing layers (the stack mirrored).

Every element is a passive series/shunt primitive, so the result is
reciprocal and passive by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import dielectric
from .config import ConfigError, check_keys, parse_sections, split_fields, to_float
from .dielectric import MaterialDb
from .network import TwoPortABCD, cascade, series_element, shunt_element

MU0 = 4e-7 * math.pi

# Projection constants of the ladder.  All geometric guesses live here.
MODEL = {
    # perimeter arc (rad) over which bypass current flows above the implant
    "leak_arc": 1.5 * math.pi,
    # radius of the tissue column sampled by the implant, in units of r_rx
    "column_radius": 5.0,
    # radial-convergence area as a fraction of sqrt(A_ring * A_col)
    "radial_area": 0.5,
    # loop inductance mu0 * span * (depth + loop_offset) / (loop_width * r_rx)
    "loop_width": 5.0,
    "loop_offset": 0.7e-3,
}

MISALIGNMENT_FLOOR = 0.05
DEFAULT_DENSITY = 1050.0
"""kg/m^3, muscle-dominated path."""

WHOLE_BODY_LIMIT = 0.08
LIMB_LIMIT = 4.0
"""ICNIRP SAR limits, W/kg."""


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LinkGeometry:
    """Physical dimensions of the link, SI metres; ``theta`` in degrees."""

    d_h: float = 2e-3
    d_v: float = 1e-3
    d_tx: float = 22e-3
    t_tx: float = 1e-3
    h_tx: float = 0.5e-3
    r_rx: float = 1e-3
    h_rx: float = 0.2e-3
    h_implant: float = 20e-3
    r_tissue: float = 10e-3
    theta: float = 0.0

    def __post_init__(self):
        for name in ("d_h", "d_tx", "t_tx", "h_tx", "r_rx", "h_rx", "h_implant", "r_tissue"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise GeometryError(f"{name} must be a positive length, got {v!r}")
        if not self.d_v >= 0:
            raise GeometryError(f"d_v must be non-negative, got {self.d_v!r}")
        if not 0 <= self.theta <= 90:
            raise GeometryError(f"theta must lie in [0, 90] degrees, got {self.theta!r}")
        if self.d_h + 2 * self.r_rx > 2 * self.r_tissue * (1 + 1e-12):
            raise GeometryError("implant does not fit in the tissue cylinder (d_h + 2 r_rx > 2 r_tissue)")
        if self.h_rx >= self.h_implant:
            raise GeometryError("h_rx must be smaller than h_implant")

    def with_value(self, name: str, value: float) -> "LinkGeometry":
        return replace(self, **{name: value})


def reference_geometry(**overrides) -> LinkGeometry:
    """The optimized 1.25 GHz design (h_tx, h_rx are artifact defaults)."""
    return LinkGeometry(**overrides)


@dataclass(frozen=True)
class TissueLayerStack:
    """Ordered (material, radial thickness) pairs, outermost first."""

    layers: tuple[tuple[str, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple((str(m), float(t)) for m, t in self.layers))
        if not self.layers:
            raise ValueError("empty tissue stack")
        for m, t in self.layers:
            if not t > 0:
                raise ValueError(f"layer {m!r} thickness must be positive, got {t!r}")

    @property
    def radius(self) -> float:
        return math.fsum(t for _, t in self.layers)

    def check(self, geom: LinkGeometry, db: MaterialDb) -> None:
        if abs(self.radius - geom.r_tissue) > 1e-9 * geom.r_tissue:
            raise GeometryError(f"stack thickness {self.radius:.6g} m != r_tissue {geom.r_tissue:.6g} m")
        db.require({m for m, _ in self.layers})

    def path(self) -> list[tuple[str, float]]:
        """Segments along a diameter: the stack, then mirrored."""
        return list(self.layers) + list(reversed(self.layers))

    def crossings(self, start: float, stop: float) -> list[tuple[str, float]]:
        """(material, length) pieces of the diameter path within [start, stop]."""
        out, pos = [], 0.0
        for m, t in self.path():
            lo, hi = max(pos, start), min(pos + t, stop)
            if hi > lo:
                out.append((m, hi - lo))
            pos += t
        return out


def layered_stack() -> TissueLayerStack:
    return load_stack(resources.files("bcplink.data").joinpath("layered.stack").read_text())


def muscle_stack(r_tissue: float = 10e-3) -> TissueLayerStack:
    return TissueLayerStack((("muscle", r_tissue),))


def load_stack(text: str) -> TissueLayerStack:
    sections = parse_sections(text)
    stacks = [s for s in sections if s.kind == "stack"]
    if len(stacks) != 1:
        raise ConfigError("stack file needs exactly one [stack] section", sections[0].line if sections else None)
    sec = stacks[0]
    check_keys(sec, {"layer"})
    layers = []
    for e in sec.values("layer"):
        name, thick = split_fields(e, 2)
        try:
            t = float(thick)
        except ValueError:
            raise ConfigError(f"layer thickness {thick!r} is not a number", e.line) from None
        if not t > 0:
            raise ConfigError(f"layer {name!r} thickness must be positive", e.line)
        layers.append((name, t))
    if not layers:
        raise ConfigError("[stack] has no layer lines", sec.line)
    return TissueLayerStack(tuple(layers))


_GEOM_KEYS = {f for f in LinkGeometry.__dataclass_fields__}


def load_geometry(text: str) -> LinkGeometry:
    """``[geometry]`` section with any LinkGeometry field; unspecified fields keep defaults."""
    sections = [s for s in parse_sections(text) if s.kind == "geometry"]
    if len(sections) != 1:
        raise ConfigError("geometry file needs exactly one [geometry] section")
    sec = sections[0]
    check_keys(sec, _GEOM_KEYS)
    values = {e.key: to_float(e) for e in sec.entries}
    if len(values) != len(sec.entries):
        raise ConfigError("duplicate key in [geometry]", sec.line)
    try:
        return LinkGeometry(**values)
    except GeometryError as exc:
        raise ConfigError(str(exc), sec.line) from None


def misalignment_scale(theta: float, floor: float = MISALIGNMENT_FLOOR) -> float:
    """Trans-impedance factor for angular misalignment ``theta`` (degrees).

    ``floor + (1 - floor) cos^2(theta)``: 1 when aligned, ``floor`` at 90 deg.
    """
    if not 0 <= theta <= 90:
        raise GeometryError(f"theta must lie in [0, 90] degrees, got {theta!r}")
    return floor + (1 - floor) * math.cos(math.radians(theta)) ** 2


@dataclass(frozen=True)
class LadderElement:
    name: str
    kind: str  # "series" | "shunt"
    value: complex  # ohms for series, siemens for shunt
    area: float  # cross-section carrying the element current, m^2
    sigma: float  # conductivity of the tissue the current crosses, S/m


@dataclass(frozen=True)
class ChannelLadder:
    f: float
    elements: tuple[LadderElement, ...]
    tap: float

    def abcd(self) -> TwoPortABCD:
        return cascade(series_element(e.value, self.f) if e.kind == "series" else shunt_element(e.value, self.f)
                       for e in self.elements)


def _host(stack: TissueLayerStack, db: MaterialDb, geom: LinkGeometry, f: float):
    """Thickness-weighted admittivity of the layers around the implant."""
    pieces = stack.crossings(geom.d_h, geom.d_h + 2 * geom.r_rx)
    total = math.fsum(t for _, t in pieces)
    kappa = sum(dielectric.complex_conductivity(db[m], f) * t for m, t in pieces) / total
    return complex(kappa)


def tap_fraction(geom: LinkGeometry) -> float:
    """Fraction of the ring gap spanned by the implant electrodes, times misalignment."""
    gap = geom.d_tx + geom.h_tx
    span = geom.h_implant - geom.h_rx
    overlap = min(span / 2 + geom.d_v, gap / 2) - max(-span / 2 + geom.d_v, -gap / 2)
    return max(overlap, 0.0) / gap * misalignment_scale(geom.theta)


def channel_ladder(geom: LinkGeometry, stack: TissueLayerStack, db: MaterialDb, f: float) -> ChannelLadder:
    stack.check(geom, db)
    if not f > 0:
        raise ValueError("frequency must be positive")
    w = 2 * math.pi * f
    gap = geom.d_tx + geom.h_tx
    span = geom.h_implant - geom.h_rx
    depth = geom.d_h + geom.r_rx
    r_mean = geom.r_tissue + geom.t_tx / 2
    a_ring = geom.t_tx * 2 * math.pi * r_mean
    a_col = math.pi * (MODEL["column_radius"] * geom.r_rx) ** 2
    a_rad = MODEL["radial_area"] * math.sqrt(a_ring * a_col)
    w_leak = MODEL["leak_arc"] * geom.r_tissue

    outer = stack.layers[0][0]
    sigma_outer = dielectric.conductivity(db[outer], f)
    r_eq = math.sqrt(a_ring / math.pi)
    elements = [LadderElement("ring_spreading", "series", 2 / (4 * sigma_outer * r_eq), a_ring, sigma_outer)]

    y_leak = 0j
    z_desc = 0j
    sig_desc = []
    for m, dt in stack.crossings(0.0, depth):
        kappa = dielectric.complex_conductivity(db[m], f)
        y_leak += kappa * dt * w_leak / gap
        z_desc += 2 * dt / (kappa * a_rad)
        sig_desc.append((dielectric.conductivity(db[m], f), dt))
    sig_leak = math.fsum(s * t for s, t in sig_desc) / depth
    elements.append(LadderElement("leak", "shunt", y_leak, w_leak * depth, sig_leak))

    loop = MU0 * span * (depth + MODEL["loop_offset"]) / (MODEL["loop_width"] * geom.r_rx)
    sig_min = min(s for s, _ in sig_desc)
    elements.append(LadderElement("descent", "series", z_desc + 1j * w * loop, a_rad, sig_min))

    kappa_host = _host(stack, db, geom, f)
    sigma_host = kappa_host.real
    z_col = gap / (kappa_host * a_col)
    x = tap_fraction(geom)
    if not x > 0:
        raise GeometryError("implant span does not overlap the TX ring gap")
    elements.append(LadderElement("column", "series", (1 - x) * z_col, a_col, sigma_host))
    elements.append(LadderElement("tap", "shunt", 1 / (x * z_col), a_col, sigma_host))
    elements.append(LadderElement("rx_spreading", "series", 2 / (4 * sigma_host * geom.r_rx),
                                  math.pi * geom.r_rx ** 2, sigma_host))
    return ChannelLadder(f, tuple(elements), x)


def channel_two_port(geom: LinkGeometry, stack: TissueLayerStack, db: MaterialDb, f: float) -> TwoPortABCD:
    """ABCD of the tissue channel between the TX rings and the RX electrodes."""
    return channel_ladder(geom, stack, db, f).abcd()


@dataclass(frozen=True)
class SarEstimate:
    peak_avg_sar: float
    whole_body_limit: float = WHOLE_BODY_LIMIT
    limb_limit: float = LIMB_LIMIT
    region: str | None = None

    @property
    def compliant(self) -> bool:
        """Limb-exposure assessment (the implant sits in a limb)."""
        return self.peak_avg_sar <= self.limb_limit

    @property
    def whole_body_compliant(self) -> bool:
        return self.peak_avg_sar <= self.whole_body_limit


def icnirp_check(sar: float) -> SarEstimate:
    if not sar >= 0:
        raise ValueError(f"SAR must be non-negative, got {sar!r}")
    return SarEstimate(float(sar))


def element_currents(ladder: ChannelLadder, drive_current: float, z_load: complex | None = None) -> list[complex]:
    """Current through every ladder element for a given port-1 current.

    Port 2 is open when ``z_load`` is None.
    """
    # Walk from port 2 toward port 1 with a unit output voltage, then rescale.
    if z_load is None:
        v, i = 1.0 + 0j, 0j
    else:
        v, i = complex(z_load), 1.0 + 0j
    through = []
    for e in reversed(ladder.elements):
        if e.kind == "series":
            through.append(i)
            v = v + e.value * i
        else:
            shunt_i = e.value * v
            through.append(shunt_i)
            i = i + shunt_i
    if abs(i) == 0:
        raise ArithmeticError("port-1 current vanishes")
    scale = drive_current / i
    return [c * scale for c in reversed(through)]


def sar_coarse(drive_current_rms: float, geom: LinkGeometry, stack: TissueLayerStack, db: MaterialDb,
               f: float, mass_density: float = DEFAULT_DENSITY, z_load: complex | None = None) -> SarEstimate:
    """Peak SAR |J|^2 / (sigma rho) over the ladder regions, J = I / area."""
    if not drive_current_rms >= 0:
        raise ValueError("drive current must be non-negative")
    if not mass_density > 0:
        raise ValueError("mass density must be positive")
    ladder = channel_ladder(geom, stack, db, f)
    if drive_current_rms == 0:
        return SarEstimate(0.0)
    currents = element_currents(ladder, drive_current_rms, z_load)
    best, where = 0.0, None
    for e, cur in zip(ladder.elements, currents):
        sar = (abs(cur) / e.area) ** 2 / (e.sigma * mass_density)
        if sar > best:
            best, where = sar, e.name
    return SarEstimate(float(best), region=where)
