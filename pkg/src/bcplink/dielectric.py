"""Cole-Cole tissue dielectrics.

Complex relative permittivity of a tissue is the multi-pole Cole-Cole sum
(Gabriel parameterization)::

    eps(w) = eps_inf + sum_n d_eps_n / (1 + (j w tau_n)^(1 - alpha_n)) + sigma_s / (j w eps0)

with the engineering sign convention eps = eps' - j eps''.  The fractional
power uses the principal branch.  Parameters come from a material file so the
numbers stay data rather than code; ``default_materials()`` loads the file
shipped with the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterator, Mapping

import numpy as np

from .config import ConfigError, check_keys, parse_sections, split_fields, to_float

EPS0 = 8.8541878128e-12
"""Vacuum permittivity, F/m."""

VALID_BAND = (1e6, 10e9)
"""Band (Hz) over which the published tissue fits are considered valid."""

DEFAULT_TISSUES = ("skin", "fat", "blood", "muscle")


@dataclass(frozen=True)
class Pole:
    delta_eps: float
    tau: float
    alpha: float


@dataclass(frozen=True)
class ColeColeModel:
    eps_inf: float
    poles: tuple[Pole, ...] = ()
    sigma_static: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "poles", tuple(Pole(*p) if not isinstance(p, Pole) else p for p in self.poles))
        problem = _first_violation(self)
        if problem:
            raise ValueError(f"invalid Cole-Cole model: {problem[0]} = {problem[1]!r}")


def _first_violation(model: ColeColeModel) -> tuple[str, float] | None:
    if not model.eps_inf >= 1:
        return "eps_inf", model.eps_inf
    if not model.sigma_static >= 0:
        return "sigma_static", model.sigma_static
    for i, p in enumerate(model.poles, start=1):
        if not p.delta_eps >= 0:
            return f"pole {i} delta_eps", p.delta_eps
        if not p.tau > 0:
            return f"pole {i} tau", p.tau
        if not 0 <= p.alpha < 1:
            return f"pole {i} alpha", p.alpha
    return None


def _check_freq(f):
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError("frequency must be positive")
    return f


def complex_permittivity(model: ColeColeModel, f):
    """Complex relative permittivity at frequency ``f`` (Hz, scalar or array).

    The imaginary part is never positive (lossy medium).
    """
    f = _check_freq(f)
    w = 2 * np.pi * f
    eps = np.full(f.shape, model.eps_inf, dtype=complex)
    for p in model.poles:
        eps = eps + p.delta_eps / (1 + (1j * w * p.tau) ** (1 - p.alpha))
    eps = eps + model.sigma_static / (1j * w * EPS0)
    return eps if eps.ndim else complex(eps)


def conductivity(model: ColeColeModel, f):
    """Effective conductivity ``-w eps0 Im(eps)`` in S/m."""
    f = _check_freq(f)
    sigma = -2 * np.pi * f * EPS0 * np.imag(complex_permittivity(model, f))
    return sigma if np.ndim(sigma) else float(sigma)


def complex_conductivity(model: ColeColeModel, f):
    """Admittivity ``sigma + j w eps0 eps'`` (S/m); current density per unit field."""
    f = _check_freq(f)
    return 1j * 2 * np.pi * f * EPS0 * complex_permittivity(model, f)


def in_band(f) -> bool:
    lo, hi = VALID_BAND
    return bool(np.all((np.asarray(f) >= lo) & (np.asarray(f) <= hi)))


class MaterialDb(Mapping[str, ColeColeModel]):
    """Case-insensitive name -> ColeColeModel mapping."""

    def __init__(self, entries: Mapping[str, ColeColeModel] | None = None, source_hash: str | None = None):
        self._entries: dict[str, ColeColeModel] = {}
        for name, model in (entries or {}).items():
            key = name.casefold()
            if key in self._entries:
                raise ValueError(f"duplicate material {name!r}")
            self._entries[key] = model
        self.source_hash = source_hash

    def __getitem__(self, name: str) -> ColeColeModel:
        try:
            return self._entries[name.casefold()]
        except KeyError:
            raise KeyError(f"unknown material {name!r}; known: {', '.join(self._entries) or 'none'}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def with_overrides(self, **models: ColeColeModel) -> "MaterialDb":
        merged = dict(self._entries)
        merged.update({k.casefold(): v for k, v in models.items()})
        return MaterialDb(merged)

    def require(self, names) -> None:
        missing = [n for n in names if n.casefold() not in self._entries]
        if missing:
            raise KeyError(f"material database lacks {', '.join(missing)}")


_MATERIAL_KEYS = {"eps_inf", "sigma_static", "pole"}


def load_material_db(text: str) -> MaterialDb:
    """Parse a material file into a MaterialDb.

    Errors carry the offending line number; invariant violations name the
    material and the field.
    """
    import hashlib

    entries: dict[str, ColeColeModel] = {}
    for sec in parse_sections(text):
        if sec.kind != "material":
            raise ConfigError(f"unexpected section [{sec.kind}] in material file", sec.line)
        if not sec.name:
            raise ConfigError("[material] header needs a name", sec.line)
        name = sec.name.casefold()
        if name in entries:
            raise ConfigError(f"duplicate material {sec.name!r}", sec.line)
        check_keys(sec, _MATERIAL_KEYS)
        eps_inf = to_float(sec.single("eps_inf"))
        sig = sec.single("sigma_static", required=False)
        sigma_static = to_float(sig) if sig else 0.0
        poles = []
        for e in sec.values("pole"):
            fields = split_fields(e, 3)
            try:
                poles.append(Pole(*(float(x) for x in fields)))
            except ValueError:
                raise ConfigError(f"pole: non-numeric field in {e.value!r}", e.line) from None
        try:
            model = ColeColeModel(eps_inf, tuple(poles), sigma_static)
        except ValueError:
            field_name, value = _violation_of(eps_inf, poles, sigma_static)
            raise ConfigError(f"material {sec.name!r}: invalid {field_name} = {value!r}", sec.line) from None
        entries[name] = model
    return MaterialDb(entries, source_hash=hashlib.sha256(text.encode()).hexdigest())


def _violation_of(eps_inf, poles, sigma_static):
    probe = object.__new__(ColeColeModel)
    object.__setattr__(probe, "eps_inf", eps_inf)
    object.__setattr__(probe, "poles", tuple(poles))
    object.__setattr__(probe, "sigma_static", sigma_static)
    return _first_violation(probe)


def default_material_text() -> str:
    return resources.files("bcplink.data").joinpath("gabriel_tissues.mat").read_text()


def default_materials() -> MaterialDb:
    return load_material_db(default_material_text())


def with_conductor(db: MaterialDb, sigma: float, names=DEFAULT_TISSUES) -> MaterialDb:
    """Copy of ``db`` whose named tissues are replaced by a dispersion-free conductor."""
    model = ColeColeModel(eps_inf=1.0, sigma_static=sigma)
    return db.with_overrides(**{n: model for n in names})


def debye_static_limit(model: ColeColeModel) -> float:
    """Low-frequency real permittivity ``eps_inf + sum(delta_eps)``."""
    return model.eps_inf + math.fsum(p.delta_eps for p in model.poles)
