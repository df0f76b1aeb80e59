import math

import numpy as np
import pytest

from bcplink import channel as ch
from bcplink.config import ConfigError
from bcplink.dielectric import with_conductor
from bcplink.matching import match_link
from bcplink.network import abcd_to_s, max_available_gain, PortImpedances

F0 = 1.25e9
# Matched PTE (%) of the reference design, layered stack, 50 ohm load, pinned
# after the first verified computation (independent nodal check below).
PINNED_PTE_LAYERED = 0.18321695126091014


def matched_pte(geom, stack, db, f=F0):
    return match_link(ch.channel_two_port(geom, stack, db, f), 50).matched_pte


def test_default_geometry_values(geom):
    assert (geom.d_h, geom.d_v, geom.t_tx, geom.d_tx, geom.r_rx, geom.h_implant, geom.r_tissue) == \
        (2e-3, 1e-3, 1e-3, 22e-3, 1e-3, 20e-3, 10e-3)


@pytest.mark.parametrize("kw", [dict(d_h=0), dict(r_rx=-1e-3), dict(theta=91), dict(theta=-1),
                                dict(d_h=19e-3, r_rx=1e-3), dict(d_v=-1e-3), dict(h_rx=25e-3)])
def test_geometry_invariants(kw):
    with pytest.raises(ch.GeometryError):
        ch.LinkGeometry(**kw)


def test_implant_longer_than_ring_gap_is_allowed():
    ch.LinkGeometry(h_implant=60e-3)


def test_default_stack(layered, geom, db):
    assert layered.layers == (("skin", 0.7e-3), ("fat", 1.3e-3), ("muscle", 7.5e-3), ("blood", 0.5e-3))
    assert layered.radius == pytest.approx(geom.r_tissue, rel=1e-12)
    layered.check(geom, db)


def test_stack_checks(geom, db):
    with pytest.raises(ch.GeometryError, match="r_tissue"):
        ch.TissueLayerStack((("muscle", 9e-3),)).check(geom, db)
    with pytest.raises(KeyError):
        ch.TissueLayerStack((("bone", 10e-3),)).check(geom, db)
    with pytest.raises(ValueError):
        ch.TissueLayerStack((("muscle", 0.0),))
    with pytest.raises(ValueError):
        ch.TissueLayerStack(())


def test_stack_file():
    s = ch.load_stack("[stack]\nlayer = skin, 1e-3\nlayer = muscle, 9e-3\n")
    assert s.layers == (("skin", 1e-3), ("muscle", 9e-3))
    with pytest.raises(ConfigError) as err:
        ch.load_stack("[stack]\nlayer = skin, thick\n")
    assert err.value.line == 2
    with pytest.raises(ConfigError, match="unknown key"):
        ch.load_stack("[stack]\nlayers = skin, 1\n")
    with pytest.raises(ConfigError):
        ch.load_stack("[stack]\n")


def test_geometry_file():
    g = ch.load_geometry("[geometry]\nd_h = 4e-3\ntheta = 30\n")
    assert g.d_h == 4e-3 and g.theta == 30 and g.r_rx == 1e-3
    with pytest.raises(ConfigError, match="unknown key"):
        ch.load_geometry("[geometry]\ndepth = 1\n")
    with pytest.raises(ConfigError, match="theta"):
        ch.load_geometry("[geometry]\ntheta = 120\n")


def test_crossings_mirror_the_stack(layered):
    pieces = layered.crossings(0, 11e-3)
    assert [m for m, _ in pieces] == ["skin", "fat", "muscle", "blood", "blood", "muscle"]
    assert math.fsum(t for _, t in pieces) == pytest.approx(11e-3)


@pytest.mark.parametrize("f", [0.1e9, 1.25e9, 3e9])
def test_reciprocal_and_passive(geom, layered, db, f):
    lad = ch.channel_ladder(geom, layered, db, f)
    for e in lad.elements:
        assert e.value.real >= 0
    t = lad.abcd()
    assert t.is_reciprocal()
    assert abcd_to_s(t, PortImpedances(50, 50)).is_passive()


def test_deterministic(geom, layered, db):
    a = ch.channel_two_port(geom, layered, db, F0).matrix
    b = ch.channel_two_port(geom, layered, db, F0).matrix
    assert a.tobytes() == b.tobytes()


def nodal_z(ladder):
    """Z-matrix of the ladder by nodal analysis, independent of ABCD algebra."""
    # Nodes: 0 = port 1; a new node after each series element; shunts to ground.
    edges, shunts, node = [], [], 0
    for e in ladder.elements:
        if e.kind == "series":
            edges.append((node, node + 1, 1 / e.value))
            node += 1
        else:
            shunts.append((node, e.value))
    n = node + 1
    y = np.zeros((n, n), dtype=complex)
    for i, j, g in edges:
        y[i, i] += g
        y[j, j] += g
        y[i, j] -= g
        y[j, i] -= g
    for i, g in shunts:
        y[i, i] += g
    z = np.linalg.inv(y)
    return z[np.ix_([0, n - 1], [0, n - 1])]


def test_ladder_matches_nodal_analysis(geom, layered, db):
    lad = ch.channel_ladder(geom, layered, db, F0)
    t = lad.abcd()
    z_abcd = np.array([[t.a / t.c, t.det / t.c], [1 / t.c, t.d / t.c]])
    assert np.allclose(z_abcd, nodal_z(lad), rtol=1e-10, atol=0)


def test_reference_design_regression(geom, layered, db):
    assert matched_pte(geom, layered, db) == pytest.approx(PINNED_PTE_LAYERED, rel=1e-6)


def test_doubling_depth_lowers_pte(geom, layered, db):
    assert matched_pte(geom.with_value("d_h", 4e-3), layered, db) < matched_pte(geom, layered, db)


def test_depth_monotone_at_fixed_frequency(geom, layered, db):
    depths = np.linspace(0.1e-3, 14e-3, 40)
    pte = [matched_pte(geom.with_value("d_h", d), layered, db) for d in depths]
    assert all(b < a for a, b in zip(pte, pte[1:]))


def test_offset_monotone_at_fixed_frequency(geom, layered, muscle, db):
    for stack in (layered, muscle):
        pte = [matched_pte(geom.with_value("d_v", v), stack, db) for v in np.linspace(0, 10e-3, 21)]
        assert all(b <= a for a, b in zip(pte, pte[1:]))


def test_misalignment_scale():
    assert ch.misalignment_scale(0) == 1.0
    assert ch.misalignment_scale(90) == pytest.approx(ch.MISALIGNMENT_FLOOR)
    vals = [ch.misalignment_scale(t) for t in np.linspace(0, 90, 91)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    for bad in (-0.1, 90.5):
        with pytest.raises(ch.GeometryError):
            ch.misalignment_scale(bad)


def test_misalignment_scales_only_the_tap(geom, layered, db):
    a = ch.channel_ladder(geom, layered, db, F0)
    b = ch.channel_ladder(geom.with_value("theta", 60), layered, db, F0)
    assert b.tap == pytest.approx(a.tap * ch.misalignment_scale(60))
    names = [e.name for e in a.elements]
    for ea, eb in zip(a.elements, b.elements):
        if ea.name not in ("column", "tap"):
            assert ea.value == eb.value, names


@pytest.mark.xfail(strict=True, reason="conductor limit: the leak shunt and the loop inductance starve the "
                                       "implant as sigma grows, so matched PTE falls (see decisions ledger)")
def test_near_perfect_conductor_improves_pte(geom, muscle, db):
    lo = max_available_gain(ch.channel_two_port(geom, muscle, with_conductor(db, 1.0), F0))
    hi = max_available_gain(ch.channel_two_port(geom, muscle, with_conductor(db, 1e6), F0))
    assert hi > lo


def test_conductor_limit_is_finite_and_passive(geom, muscle, db):
    t = ch.channel_two_port(geom, muscle, with_conductor(db, 1e6), F0)
    assert t.is_reciprocal()
    assert 0 <= max_available_gain(t) < 1


def test_no_overlap_is_rejected(db, layered):
    g = ch.LinkGeometry(d_v=40e-3)
    with pytest.raises(ch.GeometryError, match="overlap"):
        ch.channel_two_port(g, layered, db, F0)


def test_icnirp():
    r = ch.icnirp_check(0.031)
    assert r.compliant and r.whole_body_compliant
    assert ch.icnirp_check(0.08).whole_body_compliant
    r = ch.icnirp_check(0.09)
    assert r.compliant and not r.whole_body_compliant
    r = ch.icnirp_check(5.0)
    assert not r.compliant and not r.whole_body_compliant
    assert (r.whole_body_limit, r.limb_limit) == (0.08, 4.0)
    with pytest.raises(ValueError):
        ch.icnirp_check(-1)


def test_sar_coarse(geom, layered, db):
    assert ch.sar_coarse(0.0, geom, layered, db, F0).peak_avg_sar == 0
    a = ch.sar_coarse(1e-3, geom, layered, db, F0)
    b = ch.sar_coarse(2e-3, geom, layered, db, F0)
    assert b.peak_avg_sar == pytest.approx(4 * a.peak_avg_sar, rel=1e-12)
    assert a.region in {e.name for e in ch.channel_ladder(geom, layered, db, F0).elements}
    loaded = ch.sar_coarse(1e-3, geom, layered, db, F0, z_load=50)
    assert loaded.peak_avg_sar > 0
    with pytest.raises(ValueError):
        ch.sar_coarse(-1, geom, layered, db, F0)
    with pytest.raises(ValueError):
        ch.sar_coarse(1e-3, geom, layered, db, F0, mass_density=0)


def test_element_currents_conserve_charge(geom, layered, db):
    lad = ch.channel_ladder(geom, layered, db, F0)
    cur = ch.element_currents(lad, 1.0, z_load=100)
    assert cur[0] == pytest.approx(1.0)
    # ring current splits into leak and descent
    assert cur[1] + cur[2] == pytest.approx(cur[0], rel=1e-12)
