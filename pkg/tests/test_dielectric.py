import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcplink import dielectric as de
from bcplink.config import ConfigError

BAND = np.geomspace(1e6, 10e9, 400)


def test_dispersion_free_is_constant():
    m = de.ColeColeModel(eps_inf=4)
    for f in (1e3, 1e6, 1.25e9, 5e10):
        assert de.complex_permittivity(m, f) == 4 + 0j


def test_debye_low_frequency_limit():
    m = de.ColeColeModel(4, [(50, 10e-9, 0)])
    eps = de.complex_permittivity(m, 1e3)
    assert abs(eps - 54) / 54 < 1e-3
    assert de.debye_static_limit(m) == 54


def test_ionic_only_conductivity():
    m = de.ColeColeModel(4, sigma_static=0.5)
    for f in (1e6, 1e9, 3e9):
        assert de.conductivity(m, f) == pytest.approx(0.5, rel=1e-12)


def test_single_pole_conductivity_tends_to_static():
    m = de.ColeColeModel(4, [(50, 10e-9, 0.1)], sigma_static=0.3)
    assert de.conductivity(m, 1.0) == pytest.approx(0.3, rel=1e-3)


def test_admittivity_relation(db):
    m = db["muscle"]
    f = 1.25e9
    kappa = de.complex_conductivity(m, f)
    eps = de.complex_permittivity(m, f)
    assert kappa.real == pytest.approx(de.conductivity(m, f), rel=1e-12)
    assert kappa.imag == pytest.approx(2 * math.pi * f * de.EPS0 * eps.real, rel=1e-12)


def test_array_input_matches_scalar(db):
    m = db["skin"]
    arr = de.complex_permittivity(m, np.array([1e8, 1e9]))
    assert arr[1] == pytest.approx(de.complex_permittivity(m, 1e9), rel=1e-14)


@pytest.mark.parametrize("f", [0, -1.0, float("nan")])
def test_nonpositive_frequency(f, db):
    with pytest.raises(ValueError):
        de.complex_permittivity(db["fat"], f)
    with pytest.raises(ValueError):
        de.conductivity(db["fat"], f)


@pytest.mark.parametrize("kwargs, field", [
    (dict(eps_inf=0.5), "eps_inf"),
    (dict(eps_inf=4, sigma_static=-1), "sigma_static"),
    (dict(eps_inf=4, poles=[(-1, 1e-9, 0)]), "delta_eps"),
    (dict(eps_inf=4, poles=[(1, 0, 0)]), "tau"),
    (dict(eps_inf=4, poles=[(1, 1e-9, 1.0)]), "alpha"),
])
def test_model_invariants(kwargs, field):
    with pytest.raises(ValueError, match=field):
        de.ColeColeModel(**kwargs)


models = st.builds(
    de.ColeColeModel,
    eps_inf=st.floats(1, 100),
    poles=st.lists(st.tuples(st.floats(0, 1e7), st.floats(1e-13, 1e-1), st.floats(0, 0.99)), max_size=4),
    sigma_static=st.floats(0, 10),
)


@given(models, st.floats(1e6, 10e9))
def test_passive_and_above_one(model, f):
    eps = de.complex_permittivity(model, f)
    assert eps.imag <= 0
    assert eps.real >= 1 - 1e-9


@given(st.floats(1, 50), st.floats(0, 1e4), st.floats(1e-12, 1e-3))
def test_debye_real_part_monotone(eps_inf, d_eps, tau):
    m = de.ColeColeModel(eps_inf, [(d_eps, tau, 0.0)])
    re = de.complex_permittivity(m, BAND).real
    assert np.all(np.diff(re) <= 1e-12 * re[:-1])


@pytest.mark.parametrize("name", de.DEFAULT_TISSUES)
def test_shipped_conductivity_non_decreasing(db, name):
    sigma = de.conductivity(db[name], BAND)
    assert np.all(np.diff(sigma) >= 0)
    assert np.all(sigma >= db[name].sigma_static)


def test_default_db_contents(db):
    assert sorted(db) == sorted(de.DEFAULT_TISSUES)
    assert db["MUSCLE"] is db["muscle"]
    db.require(["Skin", "fat"])
    with pytest.raises(KeyError, match="bone"):
        db.require(["bone"])
    assert len(db.source_hash) == 64


def test_muscle_spot_value(db):
    # Independently tabulated value for muscle at 1 GHz: eps' ~ 54.8, sigma ~ 0.98 S/m
    eps = de.complex_permittivity(db["muscle"], 1e9)
    assert eps.real == pytest.approx(54.81, abs=0.05)
    assert de.conductivity(db["muscle"], 1e9) == pytest.approx(0.978, abs=0.005)


def test_load_errors():
    with pytest.raises(ConfigError) as err:
        de.load_material_db("[material muscle]\neps_inf = 4\npole = 1, 1e-9, 1.2\n")
    assert "muscle" in str(err.value) and "alpha" in str(err.value)
    with pytest.raises(ConfigError, match="duplicate material"):
        de.load_material_db("[material a]\neps_inf = 2\n[material A]\neps_inf = 3\n")
    with pytest.raises(ConfigError, match="unknown key 'colour'"):
        de.load_material_db("[material a]\neps_inf = 2\ncolour = red\n")
    with pytest.raises(ConfigError) as err:
        de.load_material_db("[material a]\neps_inf = 2\npole = 1, x, 0\n")
    assert err.value.line == 3
    with pytest.raises(ConfigError, match="missing key 'eps_inf'"):
        de.load_material_db("[material a]\nsigma_static = 1\n")


def test_empty_file_gives_empty_db():
    db = de.load_material_db("# nothing here\n")
    assert len(db) == 0
    with pytest.raises(KeyError):
        db.require(de.DEFAULT_TISSUES)


def test_with_conductor(db):
    c = de.with_conductor(db, 2.0)
    assert de.conductivity(c["blood"], 1e9) == pytest.approx(2.0)
    assert de.conductivity(db["blood"], 1e9) != pytest.approx(2.0)


def test_band():
    assert de.in_band(1.25e9) and not de.in_band(20e9)
