"""Touchstone version 1 two-port (.s2p) reading and writing.

Only S-parameters are handled.  Data rows carry nine numbers in the two-port
column order ``f S11 S21 S12 S22``; values are stored internally as complex
numbers with frequency in Hz, whatever the option line said.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .network import PortImpedances, SMatrix, TwoPortABCD, abcd_to_s

UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FORMATS = ("RI", "MA", "DB")


class TouchstoneError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class FrequencyTable:
    """Two-port S data on a strictly increasing frequency grid (Hz)."""

    freqs: tuple[float, ...]
    s11: tuple[complex, ...]
    s21: tuple[complex, ...]
    s12: tuple[complex, ...]
    s22: tuple[complex, ...]
    r_ref: float = 50.0
    comments: tuple[str, ...] = ()
    source_unit: str = "GHz"
    source_format: str = "MA"

    def __post_init__(self):
        n = len(self.freqs)
        for name in ("s11", "s21", "s12", "s22"):
            object.__setattr__(self, name, tuple(complex(v) for v in getattr(self, name)))
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))
        object.__setattr__(self, "comments", tuple(self.comments))
        if not self.r_ref > 0:
            raise ValueError(f"reference resistance must be positive, got {self.r_ref!r}")
        if any(b <= a for a, b in zip(self.freqs, self.freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")

    def __len__(self) -> int:
        return len(self.freqs)

    def rows(self):
        return zip(self.freqs, self.s11, self.s21, self.s12, self.s22)

    def same_values(self, other: "FrequencyTable") -> bool:
        return (self.r_ref == other.r_ref and self.freqs == other.freqs and self.s11 == other.s11
                and self.s21 == other.s21 and self.s12 == other.s12 and self.s22 == other.s22)


def _pair(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10 ** (a / 20)
    return cmath.rect(mag, math.radians(b))


def _parse_option(tokens: list[str], lineno: int):
    unit, fmt, param, r_ref = "ghz", "MA", "S", 50.0
    it = iter(tokens)
    for tok in it:
        low = tok.lower()
        if low in UNITS:
            unit = low
        elif tok.upper() in FORMATS:
            fmt = tok.upper()
        elif tok.upper() in ("S", "Y", "Z", "H", "G"):
            param = tok.upper()
        elif low == "r":
            try:
                r_ref = float(next(it))
            except (StopIteration, ValueError):
                raise TouchstoneError("option line: R needs a number", lineno) from None
        else:
            raise TouchstoneError(f"option line: unknown token {tok!r}", lineno)
    if param != "S":
        raise TouchstoneError(f"only S-parameter files are supported, got {param}", lineno)
    if not r_ref > 0:
        raise TouchstoneError("option line: reference resistance must be positive", lineno)
    return unit, fmt, r_ref


def parse_touchstone(text: str) -> FrequencyTable:
    comments, option, rows = [], None, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, _, remark = raw.partition("!")
        if "!" in raw:
            comments.append(remark.strip())
        line = body.strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError(f"Touchstone version 2 keyword {line.split()[0]!r}: only version 1 is supported",
                                  lineno)
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneError("second option line", lineno)
            option = _parse_option(line[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneError("data before the option line", lineno)
        try:
            nums = [float(t) for t in line.split()]
        except ValueError:
            raise TouchstoneError(f"malformed data row {line!r}", lineno) from None
        if len(nums) != 9:
            if len(nums) == 3:
                raise TouchstoneError("one-port row: only two-port files are supported", lineno)
            raise TouchstoneError(f"expected 9 numbers in a two-port row, got {len(nums)}", lineno)
        rows.append((lineno, nums))
    if option is None:
        raise TouchstoneError("missing option line")
    unit, fmt, r_ref = option
    freqs, cols = [], ([], [], [], [])
    for lineno, nums in rows:
        f = nums[0] * UNITS[unit]
        if freqs and f <= freqs[-1]:
            raise TouchstoneError("frequencies must be strictly increasing", lineno)
        freqs.append(f)
        for k in range(4):
            cols[k].append(_pair(nums[1 + 2 * k], nums[2 + 2 * k], fmt))
    unit_name = {"hz": "Hz", "khz": "kHz", "mhz": "MHz", "ghz": "GHz"}[unit]
    return FrequencyTable(tuple(freqs), *map(tuple, cols), r_ref=r_ref, comments=tuple(comments),
                          source_unit=unit_name, source_format=fmt)


def _num(x: float) -> str:
    return f"{x:.17g}"


def _fmt_pair(z: complex, fmt: str) -> str:
    if fmt == "RI":
        return f"{_num(z.real)} {_num(z.imag)}"
    mag, ang = abs(z), math.degrees(cmath.phase(z))
    if fmt == "DB":
        mag = 20 * math.log10(mag) if mag > 0 else -math.inf
        if mag == -math.inf:
            raise ValueError("zero magnitude cannot be written in DB format")
    return f"{_num(mag)} {_num(ang)}"


def write_touchstone(table: FrequencyTable, fmt: str = "RI") -> str:
    """Canonical text: Hz units, 17 significant digits, single spaces."""
    fmt = fmt.upper()
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if len(table) == 0:
        raise ValueError("cannot write an empty table")
    lines = [f"! {c}" if c else "!" for c in table.comments]
    lines.append(f"# Hz S {fmt} R {_num(table.r_ref)}")
    for f, *s in table.rows():
        lines.append(" ".join([_num(f)] + [_fmt_pair(z, fmt) for z in s]))
    return "\n".join(lines) + "\n"


def table_to_channel(table: FrequencyTable, f: float) -> SMatrix:
    """S-matrix at ``f`` by linear interpolation of real and imaginary parts."""
    if len(table) == 0:
        raise ValueError("empty table")
    lo, hi = table.freqs[0], table.freqs[-1]
    if not lo <= f <= hi:
        raise ValueError(f"{f} Hz outside table range [{lo}, {hi}] Hz; extrapolation refused")
    xp = np.asarray(table.freqs)

    def at(col):
        v = np.asarray(col)
        return complex(np.interp(f, xp, v.real), np.interp(f, xp, v.imag))

    return SMatrix(f, at(table.s11), at(table.s12), at(table.s21), at(table.s22),
                   PortImpedances(table.r_ref, table.r_ref))


def resample(table: FrequencyTable, freqs) -> FrequencyTable:
    mats = [table_to_channel(table, float(f)) for f in freqs]
    return table_from_s(mats, table.r_ref, comments=table.comments)


def table_from_s(mats, r_ref: float = 50.0, comments=()) -> FrequencyTable:
    mats = list(mats)
    return FrequencyTable(tuple(m.f for m in mats), tuple(m.s11 for m in mats), tuple(m.s21 for m in mats),
                          tuple(m.s12 for m in mats), tuple(m.s22 for m in mats), r_ref=r_ref,
                          comments=tuple(comments), source_unit="Hz", source_format="RI")


def table_from_abcd(blocks: list[TwoPortABCD], r_ref: float = 50.0, comments=()) -> FrequencyTable:
    refs = PortImpedances(r_ref, r_ref)
    return table_from_s((abcd_to_s(t, refs) for t in blocks), r_ref, comments)
