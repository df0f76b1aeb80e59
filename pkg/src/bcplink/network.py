"""Two-port ABCD / S-parameter algebra.

S-parameters use the traveling-wave convention with ``sqrt(Re Z)``
normalisation.  For a two-port ``[[A, B], [C, D]]`` between port impedances
``Zp1``, ``Zp2``::

    den = A Zp2 + B + C Zp1 Zp2 + D Zp1
    S11 = (A Zp2 + B - C Zp1 Zp2 - D Zp1) / den
    S22 = (-A Zp2 + B - C Zp1 Zp2 + D Zp1) / den
    S21 = 2 sqrt(Re Zp1 Re Zp2) / den
    S12 = 2 (AD - BC) sqrt(Re Zp1 Re Zp2) / den

With these definitions ``|S21|^2`` is the transducer gain: power delivered
into a load ``Zp2`` over the power available from a source of internal
impedance ``Zp1``, for real or complex port impedances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    degenerate: float = 1e-30
    reciprocity: float = 1e-9
    passivity: float = 1e-9


TOL = Tolerances()

CONVENTION = "traveling-wave"


class DegenerateNetwork(ArithmeticError):
    """A conversion denominator vanished."""


class UnilateralNetwork(ArithmeticError):
    """|S12 S21| = 0: stability factor undefined."""


@dataclass(frozen=True)
class TwoPortABCD:
    f: float
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"frequency must be positive, got {self.f!r}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def det(self) -> complex:
        """ad - bc, exact over the stored entries, then rounded once.

        Passive ladders have |ad| ~ |bc| >> 1 with ad - bc = 1, so the plain
        float expression loses most of its digits to cancellation.
        """
        a, b, c, d = (complex(x) for x in (self.a, self.b, self.c, self.d))
        fr = Fraction
        re = (fr(a.real) * fr(d.real) - fr(a.imag) * fr(d.imag)
              - fr(b.real) * fr(c.real) + fr(b.imag) * fr(c.imag))
        im = (fr(a.real) * fr(d.imag) + fr(a.imag) * fr(d.real)
              - fr(b.real) * fr(c.imag) - fr(b.imag) * fr(c.real))
        return complex(float(re), float(im))

    def is_reciprocal(self, tol: float = TOL.reciprocity) -> bool:
        """ad - bc = 1, relative to the size of the products."""
        scale = max(1.0, abs(self.a * self.d), abs(self.b * self.c))
        return abs(self.det - 1) <= tol * scale

    @classmethod
    def from_matrix(cls, f: float, m) -> "TwoPortABCD":
        m = np.asarray(m, dtype=complex)
        return cls(f, complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    def __matmul__(self, other: "TwoPortABCD") -> "TwoPortABCD":
        return cascade([self, other])


@dataclass(frozen=True)
class PortImpedances:
    zp1: complex = 50.0
    zp2: complex = 50.0

    def __post_init__(self):
        object.__setattr__(self, "zp1", complex(self.zp1))
        object.__setattr__(self, "zp2", complex(self.zp2))
        if not (self.zp1.real > 0 and self.zp2.real > 0):
            raise ValueError(f"port impedances need positive real parts: {self.zp1}, {self.zp2}")


@dataclass(frozen=True)
class SMatrix:
    f: float
    s11: complex
    s12: complex
    s21: complex
    s22: complex
    refs: PortImpedances = PortImpedances()

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]], dtype=complex)

    def is_passive(self, tol: float = TOL.passivity) -> bool:
        return (abs(self.s11) ** 2 + abs(self.s21) ** 2 <= 1 + tol
                and abs(self.s22) ** 2 + abs(self.s12) ** 2 <= 1 + tol)


def identity(f: float) -> TwoPortABCD:
    return TwoPortABCD(f, 1, 0, 0, 1)


def series_element(z: complex, f: float) -> TwoPortABCD:
    return TwoPortABCD(f, 1, complex(z), 0, 1)


def shunt_element(y: complex, f: float) -> TwoPortABCD:
    return TwoPortABCD(f, 1, 0, complex(y), 1)


def cascade(blocks) -> TwoPortABCD:
    """Left-to-right product of ABCD blocks sharing one frequency."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("cascade of an empty list")
    f = blocks[0].f
    for blk in blocks[1:]:
        if blk.f != f:
            raise ValueError(f"frequency mismatch in cascade: {blk.f} vs {f}")
    m = reduce(np.matmul, (b.matrix for b in blocks))
    return TwoPortABCD.from_matrix(f, m)


def _denominator(t: TwoPortABCD, refs: PortImpedances) -> complex:
    z1, z2 = refs.zp1, refs.zp2
    den = t.a * z2 + t.b + t.c * z1 * z2 + t.d * z1
    if abs(den) <= TOL.degenerate:
        raise DegenerateNetwork("ABCD->S denominator vanishes")
    return den


def s11_from_abcd(t: TwoPortABCD, refs: PortImpedances) -> complex:
    z1, z2 = refs.zp1, refs.zp2
    return (t.a * z2 + t.b - t.c * z1 * z2 - t.d * z1) / _denominator(t, refs)


def s22_from_abcd(t: TwoPortABCD, refs: PortImpedances) -> complex:
    z1, z2 = refs.zp1, refs.zp2
    return (-t.a * z2 + t.b - t.c * z1 * z2 + t.d * z1) / _denominator(t, refs)


def abcd_to_s(t: TwoPortABCD, refs: PortImpedances = PortImpedances()) -> SMatrix:
    den = _denominator(t, refs)
    root = math.sqrt(refs.zp1.real * refs.zp2.real)
    return SMatrix(
        f=t.f,
        s11=s11_from_abcd(t, refs),
        s12=2 * t.det * root / den,
        s21=2 * root / den,
        s22=s22_from_abcd(t, refs),
        refs=refs,
    )


def s_to_abcd(s: SMatrix) -> TwoPortABCD:
    """Inverse of :func:`abcd_to_s` for the same port impedances."""
    z1, z2 = s.refs.zp1, s.refs.zp2
    if abs(s.s21) <= TOL.degenerate:
        raise DegenerateNetwork("S21 = 0: network has no ABCD representation")
    den = 2 * math.sqrt(z1.real * z2.real) / s.s21
    det = s.s12 / s.s21
    # den(1 + S11) = 2(A z2 + B),   den(1 - S11) = 2 z1 (C z2 + D)
    # den(1 - S22) = 2 z2 (A + C z1); det = AD - BC then fixes C linearly.
    p = den * (1 + s.s11) / 2
    q = den * (1 - s.s11) / (2 * z1)
    u = den * (1 - s.s22) / (2 * z2)
    c = (u * q - det) / den
    a = u - c * z1
    return TwoPortABCD(s.f, a, p - a * z2, c, q - c * z2)


def pte(s: SMatrix) -> float:
    """Power transfer efficiency in percent, ``100 |S21|^2``."""
    return 100.0 * abs(s.s21) ** 2


def stability_metrics(s: SMatrix) -> tuple[float, float]:
    """Rollett factor K and |Delta|.  Raises UnilateralNetwork if S12 S21 = 0."""
    prod = s.s12 * s.s21
    if abs(prod) == 0:
        raise UnilateralNetwork("|S12 S21| = 0; K undefined")
    delta = s.s11 * s.s22 - prod
    k = (1 - abs(s.s11) ** 2 - abs(s.s22) ** 2 + abs(delta) ** 2) / (2 * abs(prod))
    return float(k), float(abs(delta))


def input_impedance(t: TwoPortABCD, z_load: complex) -> complex:
    return (t.a * z_load + t.b) / (t.c * z_load + t.d)


def output_impedance(t: TwoPortABCD, z_source: complex) -> complex:
    return (t.d * z_source + t.b) / (t.c * z_source + t.a)


def transducer_gain(t: TwoPortABCD, z_source: complex, z_load: complex) -> float:
    """P_load / P_available for the given terminations (fraction, not percent)."""
    den = t.a * z_load + t.b + t.c * z_source * z_load + t.d * z_source
    return 4 * complex(z_source).real * complex(z_load).real / abs(den) ** 2


def z_parameters(t: TwoPortABCD) -> np.ndarray:
    if abs(t.c) <= TOL.degenerate:
        raise DegenerateNetwork("C = 0: Z-parameters undefined")
    return np.array([[t.a, t.det], [1, t.d]], dtype=complex) / t.c


def max_available_gain(t: TwoPortABCD) -> float:
    """Maximum transducer gain over all passive terminations (fraction).

    ``|S21 / S12| (K - sqrt(K^2 - 1))`` on 50 ohm real references; both K and
    the result are independent of the reference.  Requires K >= 1.
    """
    s = abcd_to_s(t, PortImpedances(50.0, 50.0))
    k, _ = stability_metrics(s)
    if k < 1 - TOL.reciprocity:
        raise ArithmeticError(f"K = {k:.6g} < 1: no simultaneous conjugate match")
    k = max(k, 1.0)
    # k - sqrt(k^2 - 1), written to avoid cancellation at large k
    return abs(s.s21) / abs(s.s12) / (k + math.sqrt((k - 1) * (k + 1)))
