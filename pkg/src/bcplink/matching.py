"""Co-designed TX/RX L-section matching networks.

The link is ``[TX IMN] . [channel] . [RX IMN]`` between a source of impedance
``z_source`` and the load.  Both sections are solved together so that the
reflections at both ports of the full cascade vanish:

1. the classical bilateral simultaneous conjugate match of the channel gives
   the terminations ``zs_opt``, ``zl_opt`` it wants to see;
2. each side gets an L-section realizing that termination;
3. a short Newton polish on the four element values drives S11 and S22 of the
   assembled link to zero (needed when the load is complex, where the two
   sides interact through the port-2 reference).

Two embeddings of the load are offered:

``port-reference`` (default)
    The load is the port-2 reference impedance and S22 follows the
    traveling-wave definition, so S22 = 0 means the link output impedance
    equals ``Z_load`` itself.  PTE is ``100 |S21|^2`` with refs
    ``(z_source, Z_load)``.
``conjugate-load``
    The load is treated as a terminating element and the RX section presents
    its conjugate, the maximum-power condition.  Residuals use refs
    ``(z_source, conj(Z_load))``; PTE is the power reaching the real load.

Both coincide for resistive loads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize

from .network import (
    CONVENTION,
    PortImpedances,
    SMatrix,
    TwoPortABCD,
    abcd_to_s,
    cascade,
    identity,
    output_impedance,
    s_to_abcd,
    series_element,
    shunt_element,
    stability_metrics,
    transducer_gain,
)

MATCH_THRESHOLD_DB = -40.0
GAMMA_TOL = 1e-6
MARGINAL_TOL = 1e-9
EMBEDDINGS = ("port-reference", "conjugate-load")

# Element kinds shown for each side of the reference design: series L and
# shunt C on the TX side, shunt L and series C on the RX side.
PREFERRED_KINDS = {
    "TX": {"series": "inductor", "shunt": "capacitor"},
    "RX": {"series": "capacitor", "shunt": "inductor"},
}


class NoSimultaneousMatch(ArithmeticError):
    """K < 1 (or |Delta| >= 1): no pair of passive terminations matches both ports."""


class MarginalMatch(ArithmeticError):
    """K = 1 boundary, e.g. a lossless network: the match is not unique."""

    def __init__(self, k: float):
        self.k = k
        super().__init__(f"K = {k:.12g} is on the simultaneous-match boundary")


class DegenerateMatch(ArithmeticError):
    """The impedances are already conjugate: no section is needed."""


class NoLSection(ArithmeticError):
    """No two-element real-valued section exists."""


class MatchFailed(ArithmeticError):
    def __init__(self, solution: "MatchSolution"):
        self.solution = solution
        super().__init__(f"match residuals S11 {solution.residual_s11_db:.1f} dB, "
                         f"S22 {solution.residual_s22_db:.1f} dB exceed {MATCH_THRESHOLD_DB} dB")


@dataclass(frozen=True)
class LoadModel:
    """Series R-C load; ``c = None`` for a plain resistor."""

    r: float
    c: float | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"load resistance must be positive, got {self.r!r}")
        if self.c is not None and not self.c > 0:
            raise ValueError(f"load capacitance must be positive, got {self.c!r}")


def load_impedance(load: LoadModel, f: float) -> complex:
    if not f > 0:
        raise ValueError("frequency must be positive")
    if load.c is None:
        return complex(load.r)
    return complex(load.r, -1 / (2 * math.pi * f * load.c))


@dataclass(frozen=True)
class Element:
    kind: str  # "inductor" | "capacitor"
    value: float  # H or F

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.kind not in ("inductor", "capacitor"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"element value must be positive, got {self.value!r}")

    def impedance(self, f: float) -> complex:
        w = 2 * math.pi * f
        return 1j * w * self.value if self.kind == "inductor" else -1j / (w * self.value)

    def admittance(self, f: float) -> complex:
        return 1 / self.impedance(f)

    def scaled(self, k: float) -> "Element":
        return Element(self.kind, self.value * k)


def _series_from_reactance(x: float, f: float) -> Element:
    w = 2 * math.pi * f
    return Element("inductor", x / w) if x > 0 else Element("capacitor", -1 / (w * x))


def _shunt_from_susceptance(b: float, f: float) -> Element:
    w = 2 * math.pi * f
    return Element("capacitor", b / w) if b > 0 else Element("inductor", -1 / (w * b))


@dataclass(frozen=True)
class LSection:
    """Two-element section.  ``topology`` lists the elements from port 1 to port 2."""

    side: str  # "TX" | "RX"
    topology: str  # "series-then-shunt" | "shunt-then-series"
    series_elem: Element
    shunt_elem: Element
    f0: float
    note: str = ""

    def __post_init__(self):
        if self.side not in ("TX", "RX"):
            raise ValueError(f"side must be TX or RX, got {self.side!r}")
        if self.topology not in ("series-then-shunt", "shunt-then-series"):
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def honors_reference_kinds(self) -> bool:
        pref = PREFERRED_KINDS[self.side]
        return self.series_elem.kind == pref["series"] and self.shunt_elem.kind == pref["shunt"]

    def scaled(self, k_series: float, k_shunt: float) -> "LSection":
        return replace(self, series_elem=self.series_elem.scaled(k_series),
                       shunt_elem=self.shunt_elem.scaled(k_shunt))


def imn_abcd(sec: LSection | None, f: float) -> TwoPortABCD:
    """ABCD of a section at ``f``; ``None`` is a zero-length section."""
    if sec is None:
        return identity(f)
    ser = series_element(sec.series_elem.impedance(f), f)
    sh = shunt_element(sec.shunt_elem.admittance(f), f)
    return cascade([ser, sh] if sec.topology == "series-then-shunt" else [sh, ser])


def _candidates(z_from: complex, z_to: complex, f0: float, side: str):
    """All real-element L-sections whose port 1 sees conj(z_from) when port 2 sees z_to."""
    zt = z_from.conjugate()
    rt, xt = zt.real, zt.imag
    yl = 1 / z_to
    gl, bl = yl.real, yl.imag
    yt = 1 / zt
    gt, bt = yt.real, yt.imag
    rl, xl = z_to.real, z_to.imag
    out = []
    # series at port 1, shunt at port 2 (next to z_to)
    disc = gl / rt - gl * gl
    if disc >= 0:
        for sgn in (1, -1):
            bsum = sgn * math.sqrt(disc)
            b = bsum - bl
            x = xt + bsum / (gl * gl + bsum * bsum)
            out.append(("series-then-shunt", x, b, abs(bsum) / gl))
    # shunt at port 1, series at port 2
    disc = rl / gt - rl * rl
    if disc >= 0:
        for sgn in (1, -1):
            xsum = sgn * math.sqrt(disc)
            x = xsum - xl
            b = bt + xsum / (rl * rl + xsum * xsum)
            out.append(("shunt-then-series", x, b, abs(xsum) / rl))
    sections = []
    scale_x, scale_b = abs(z_from) + abs(z_to), 1 / abs(z_from) + 1 / abs(z_to)
    for topo, x, b, q in out:
        if abs(x) <= 1e-12 * scale_x or abs(b) <= 1e-12 * scale_b:
            continue
        sec = LSection(side, topo, _series_from_reactance(x, f0), _shunt_from_susceptance(b, f0), f0)
        gamma = _section_gamma(sec, z_from, z_to)
        if gamma <= GAMMA_TOL:
            sections.append((sec, q, gamma))
    return sections


def _section_gamma(sec: LSection, z_from: complex, z_to: complex) -> float:
    t = imn_abcd(sec, sec.f0)
    zin = (t.a * z_to + t.b) / (t.c * z_to + t.d)
    return abs((zin - z_from.conjugate()) / (zin + z_from))


def synthesize_l_section(z_from: complex, z_to: complex, f0: float, side: str = "TX",
                         all_solutions: bool = False):
    """L-section that, terminated in ``z_to`` at port 2, presents ``conj(z_from)`` at port 1.

    Candidates are ranked: reference element kinds for ``side`` first, then
    lower loaded Q (less stored energy), then lower |Gamma|.  Returns the best
    section, or every feasible one when ``all_solutions`` is set.
    """
    z_from, z_to = complex(z_from), complex(z_to)
    if not (z_from.real > 0 and z_to.real > 0):
        raise ValueError("both impedances need a positive real part")
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    if abs(z_to - z_from.conjugate()) <= 1e-12 * (abs(z_to) + abs(z_from)):
        raise DegenerateMatch("impedances already conjugate-matched; use a zero-length section")
    found = _candidates(z_from, z_to, f0, side)
    if not found:
        raise NoLSection(f"no real-element L-section from {z_from} to {z_to}")
    found.sort(key=lambda c: (not c[0].honors_reference_kinds, round(c[1], 9), c[2]))
    secs = []
    for sec, _, _ in found:
        if not sec.honors_reference_kinds:
            sec = replace(sec, note=f"{side} kinds differ from the reference design "
                                    f"(series {sec.series_elem.kind}, shunt {sec.shunt_elem.kind})")
        secs.append(sec)
    return secs if all_solutions else secs[0]


def _to_real_refs(s: SMatrix) -> SMatrix:
    if s.refs.zp1.imag == 0 and s.refs.zp2.imag == 0:
        return s
    return abcd_to_s(s_to_abcd(s), PortImpedances(s.refs.zp1.real, s.refs.zp2.real))


def simultaneous_conjugate_match(channel_s: SMatrix) -> tuple[complex, complex]:
    """Source and load impedances that conjugately match both channel ports.

    Raises NoSimultaneousMatch for K < 1 and MarginalMatch at K = 1.
    """
    s = _to_real_refs(channel_s)
    k, dmag = stability_metrics(s)
    if abs(k - 1) <= MARGINAL_TOL:
        raise MarginalMatch(k)
    if k < 1 or dmag >= 1:
        raise NoSimultaneousMatch(f"K = {k:.6g}, |Delta| = {dmag:.6g}: no simultaneous conjugate match")
    delta = s.s11 * s.s22 - s.s12 * s.s21
    b1 = 1 + abs(s.s11) ** 2 - abs(s.s22) ** 2 - abs(delta) ** 2
    b2 = 1 + abs(s.s22) ** 2 - abs(s.s11) ** 2 - abs(delta) ** 2
    c1 = s.s11 - delta * s.s22.conjugate()
    c2 = s.s22 - delta * s.s11.conjugate()
    # (B - sqrt(B^2 - 4|C|^2)) / 2C, rearranged to stay finite as C -> 0
    gs = 2 * c1.conjugate() / (b1 + math.sqrt(max(b1 * b1 - 4 * abs(c1) ** 2, 0.0)))
    gl = 2 * c2.conjugate() / (b2 + math.sqrt(max(b2 * b2 - 4 * abs(c2) ** 2, 0.0)))
    z1, z2 = s.refs.zp1.real, s.refs.zp2.real
    return z1 * (1 + gs) / (1 - gs), z2 * (1 + gl) / (1 - gl)


def residual_db(x: complex) -> float:
    """20 log10 |x|; -inf for an exact zero."""
    m = abs(x)
    return -math.inf if m == 0 else 20 * math.log10(m)


@dataclass(frozen=True)
class MatchSolution:
    f: float
    tx_imn: LSection | None
    rx_imn: LSection | None
    matched_pte: float
    residual_s11_db: float
    residual_s22_db: float
    refs: PortImpedances
    zs_opt: complex | None = None
    zl_opt: complex | None = None
    z_load: complex | None = None
    embedding: str = "port-reference"
    convention: str = CONVENTION
    notes: tuple[str, ...] = ()

    @property
    def matched(self) -> bool:
        return max(self.residual_s11_db, self.residual_s22_db) <= MATCH_THRESHOLD_DB


def link_abcd(tx_imn: LSection | None, channel: TwoPortABCD, rx_imn: LSection | None) -> TwoPortABCD:
    return cascade([imn_abcd(tx_imn, channel.f), channel, imn_abcd(rx_imn, channel.f)])


def verify_match(tx_imn: LSection | None, channel: TwoPortABCD, rx_imn: LSection | None,
                 refs: PortImpedances) -> MatchSolution:
    """Residual reflections and PTE of the assembled link at the channel frequency."""
    for sec in (tx_imn, rx_imn):
        if sec is not None and sec.f0 != channel.f:
            raise ValueError(f"section designed for {sec.f0} Hz, channel at {channel.f} Hz")
    s = abcd_to_s(link_abcd(tx_imn, channel, rx_imn), refs)
    return MatchSolution(
        f=channel.f, tx_imn=tx_imn, rx_imn=rx_imn,
        matched_pte=100 * abs(s.s21) ** 2,
        residual_s11_db=residual_db(s.s11), residual_s22_db=residual_db(s.s22),
        refs=refs, z_load=refs.zp2,
    )


def _polish(tx: LSection | None, channel: TwoPortABCD, rx: LSection | None, refs: PortImpedances):
    """Newton on log element values until S11 = S22 = 0 for the given refs."""
    free = [sec for sec in (tx, rx) if sec is not None]
    if not free:
        return tx, rx

    def build(p):
        k = np.exp(p)
        it = iter(k.reshape(-1, 2))
        secs = [sec.scaled(*next(it)) if sec is not None else None for sec in (tx, rx)]
        return secs

    def resid(p):
        a, b = build(p)
        s = abcd_to_s(link_abcd(a, channel, b), refs)
        return [s.s11.real, s.s11.imag, s.s22.real, s.s22.imag]

    n = 2 * len(free)
    if n == 4:
        sol = optimize.root(resid, np.zeros(4), method="hybr", options={"xtol": 1e-14})
    else:
        sol = optimize.least_squares(resid, np.zeros(2), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return tuple(build(sol.x))


def match_link(channel: TwoPortABCD, z_load: complex, z_source: complex = 50.0,
               embedding: str = "port-reference") -> MatchSolution:
    """Co-design TX and RX L-sections for ``channel`` at its frequency.

    Raises NoSimultaneousMatch when K < 1 and MatchFailed when the residuals
    stay above the match threshold.
    """
    if embedding not in EMBEDDINGS:
        raise ValueError(f"embedding must be one of {EMBEDDINGS}")
    f0 = channel.f
    z_load, z_source = complex(z_load), complex(z_source)
    notes = []
    try:
        zs_opt, zl_opt = simultaneous_conjugate_match(abcd_to_s(channel, PortImpedances(50, 50)))
    except MarginalMatch:
        # lossless channel: any source works, take the one already present
        zs_opt = z_source
        zl_opt = output_impedance(channel, z_source).conjugate()
        notes.append("K = 1 channel: source side left unmatched by construction")

    def section(z_from, z_to, side):
        try:
            return synthesize_l_section(z_from, z_to, f0, side)
        except DegenerateMatch:
            notes.append(f"{side}: impedances already matched, zero-length section")
            return None

    tx = section(z_source, zs_opt.conjugate(), "TX")
    z_term = z_load.conjugate() if embedding == "port-reference" else z_load
    rx = section(zl_opt.conjugate(), z_term, "RX")
    refs = PortImpedances(z_source, z_load if embedding == "port-reference" else z_load.conjugate())

    sol = verify_match(tx, channel, rx, refs)
    if max(sol.residual_s11_db, sol.residual_s22_db) > -150:
        ptx, prx = _polish(tx, channel, rx, refs)
        better = verify_match(ptx, channel, prx, refs)
        if max(better.residual_s11_db, better.residual_s22_db) < max(sol.residual_s11_db, sol.residual_s22_db):
            tx, rx, sol = ptx, prx, better
    pte = 100 * transducer_gain(link_abcd(tx, channel, rx), z_source, z_load)
    notes.extend(sec.note for sec in (tx, rx) if sec is not None and sec.note)
    sol = replace(sol, matched_pte=pte, zs_opt=zs_opt, zl_opt=zl_opt, z_load=z_load,
                  embedding=embedding, notes=tuple(notes))
    if not sol.matched:
        raise MatchFailed(sol)
    return sol


def matched_pte_sweep(channel_at: Callable[[float], TwoPortABCD], freqs: Iterable[float], load: LoadModel,
                      z_source: complex = 50.0, embedding: str = "port-reference") -> list[tuple[float, float]]:
    """Matched PTE (%) with the sections re-synthesized at every frequency."""
    freqs = list(freqs)
    if not freqs:
        raise ValueError("empty frequency grid")
    return [(f, match_link(channel_at(f), load_impedance(load, f), z_source, embedding).matched_pte)
            for f in freqs]


REPORT_COLUMNS = ("f_hz", "pte_pct", "s11_db", "s22_db",
                  "tx_series_kind", "tx_series_value", "tx_shunt_kind", "tx_shunt_value",
                  "rx_series_kind", "rx_series_value", "rx_shunt_kind", "rx_shunt_value", "convention")


def _elem_cells(sec: LSection | None):
    if sec is None:
        return ["none", "0", "none", "0"]
    return [sec.series_elem.kind, repr(sec.series_elem.value), sec.shunt_elem.kind, repr(sec.shunt_elem.value)]


def match_report_csv(solutions: Sequence[MatchSolution]) -> str:
    """CSV match report; ``#`` lines carry the load, embedding and notes."""
    buf = io.StringIO()
    for sol in solutions:
        z = sol.z_load
        buf.write(f"# f_hz={sol.f!r} z_load={z.real:.6g}{z.imag:+.6g}j embedding={sol.embedding}"
                  f" zs_opt={sol.zs_opt} zl_opt={sol.zl_opt}\n")
        for note in sol.notes:
            buf.write(f"# note: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for sol in solutions:
        w.writerow([repr(sol.f), repr(sol.matched_pte), repr(sol.residual_s11_db), repr(sol.residual_s22_db),
                    *_elem_cells(sol.tx_imn), *_elem_cells(sol.rx_imn), sol.convention])
    return buf.getvalue()
