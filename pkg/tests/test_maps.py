import numpy as np

from bubblelab.geometry import NORTH, SOUTH, ChartPoint
from bubblelab.maps import (
    FAMILIES,
    BipolynomialMap,
    ConjugateMap,
    Jet,
    MapFamily,
    ProjectiveCurve,
    RationalMap,
    SmoothMapSpec,
    bubble_on_bubble,
    constant_map,
    jet,
    mobius_pullback,
    ramification,
    shrinking_identity,
    two_bubble,
    veronese,
)


def test_rational_map_jets():
    m = RationalMap([0, 0, 1], [1])
    assert m.degree == 2

    j = jet(m, ChartPoint(NORTH, 0.5))
    assert j.target_chart == 0
    assert np.isclose(j.u[0], 0.25)
    assert np.isclose(j.u_z[0], 1.0)
    assert np.isclose(j.u_zz[0], 2.0)
    assert np.allclose(j.u_zb, 0.0)

    # |u| > 1 switches to the target chart 1/u
    j = m.jets(NORTH, np.array([2.0]))
    assert j.target_chart[0] == 1
    assert np.isclose(j.u[0, 0], 0.25)
    assert np.isclose(j.u_z[0, 0], -0.25)

    # the pole at infinity is finite in the south chart
    j = m.jets(SOUTH, np.array([0.0]), order=1)
    assert j.order == 1
    assert np.isclose(j.u[0, 0], 0.0)

    try:
        m.jets(NORTH, np.array([0.5]), order=3)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        jet(m, 0.5)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_rational_map_invalid():
    # z / z
    try:
        RationalMap([0, 1], [0, 1])
    except ValueError:
        pass
    else:
        raise AssertionError

    # (z^2 - 1) / (z - 1)
    try:
        RationalMap([-1, 0, 1], [-1, 1])
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        ProjectiveCurve([[1]])
    except ValueError:
        pass
    else:
        raise AssertionError


def test_ramification():
    points = ramification(RationalMap([0, 0, 1], [1]))
    assert sum(r for _, r in points) == 2
    charts = sorted((p.chart, abs(p.coord), r) for p, r in points)
    assert charts == [(NORTH, 0.0, 1), (SOUTH, 0.0, 1)]

    # degree 3: (z^3 + 1) / z
    m = RationalMap([1, 0, 0, 1], [0, 1])
    points = ramification(m)
    assert sum(r for _, r in points) == 4
    assert all(p.is_owned for p, _ in points)

    # the identity is unramified
    assert ramification(RationalMap([0, 1], [1])) == []

    # conjugate maps share the ramification of their base
    base = RationalMap([1, 0, 1], [0, 1])
    assert len(ramification(ConjugateMap(base))) == len(ramification(base))

    try:
        ramification(veronese(2))
    except TypeError:
        pass
    else:
        raise AssertionError


def test_ramification_multiple_root():
    # (z - a)^4 (z - a - 1e-9): du has a triple root at a and a simple one 8e-10 away
    a = 0.3
    numerator = np.polynomial.polynomial.polyfromroots([a] * 4 + [a + 1e-9])
    points = ramification(RationalMap(list(numerator), [1]))
    finite = [(p, r) for p, r in points if p.chart == NORTH]
    assert len(finite) == 1
    p, mult = finite[0]
    assert mult == 4
    assert abs(p.coord - a) < 1e-6
    assert sorted(r for _, r in points) == [4, 4]

    # distinct nearby roots stay apart
    numerator = np.polynomial.polynomial.polyfromroots([0.2, 0.2, 0.2, 0.5, 0.5])
    mults = sorted(r for p, r in ramification(RationalMap(list(numerator), [1])) if p.chart == NORTH)
    assert mults == [1, 1, 2]


def test_veronese():
    assert isinstance(veronese(1), RationalMap)
    m = veronese(2)
    assert m.dim == 2
    Z = m.homogeneous(NORTH, np.array([1.0]))
    assert np.allclose(Z[:, 0], [1.0, np.sqrt(2.0), 1.0])


def test_conjugate_map():
    base = RationalMap([0, 1], [1])
    m = ConjugateMap(base)
    j = m.jets(NORTH, np.array([0.3 + 0.1j]))
    assert np.allclose(j.u, 0.3 - 0.1j)
    assert np.allclose(j.u_z, 0.0)
    assert np.allclose(j.u_zb, 1.0)
    assert j.kind == "antiholomorphic"

    try:
        ConjugateMap(BipolynomialMap([{(1, 1): 1.0}]))
    except TypeError:
        pass
    else:
        raise AssertionError


def test_bipolynomial_map():
    # u = |z|^2 + 2 z
    m = BipolynomialMap([{(1, 1): 1.0, (1, 0): 2.0}])
    z = np.array([0.5 + 0.5j])
    j = m.jets(NORTH, z)
    assert np.allclose(j.u, 0.5 + 1.0 + 1.0j)
    assert np.allclose(j.u_z, np.conj(z) + 2.0)
    assert np.allclose(j.u_zb, z)
    assert np.allclose(j.u_zzb, 1.0)
    assert np.allclose(j.u_zz, 0.0)

    try:
        m.jets(SOUTH, z)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        BipolynomialMap([{(-1, 0): 1.0}])
    except ValueError:
        pass
    else:
        raise AssertionError


def test_smooth_map_spec():
    def identity(chart, z, order):
        ones = np.ones((1,) + z.shape, dtype=complex)
        zeros = np.zeros_like(ones)
        return Jet(z[None, ...], ones, zeros, np.zeros(z.shape, dtype=int), chart, z, zeros, zeros, zeros)

    m = SmoothMapSpec(identity, kind="holomorphic")
    j = m.jets(NORTH, np.array([0.2]))
    assert j.kind == "holomorphic"

    try:
        SmoothMapSpec(identity, kind="harmonic")
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        SmoothMapSpec(identity, kind="antiholomorphic").jets(NORTH, np.array([0.2]))
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        SmoothMapSpec(None)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_mobius_pullback():
    m = RationalMap([0, 0, 1], [1])
    pulled = mobius_pullback(m, 0.5)
    j = pulled.jets(NORTH, np.array([1.0]))
    assert np.isclose(j.u[0, 0], 0.25)
    assert np.isclose(j.u_z[0, 0], 0.5)
    assert np.isclose(j.u_zz[0, 0], 0.5)

    # image points beyond the unit disk are evaluated in the south chart
    j = pulled.jets(NORTH, np.array([4.0]))
    assert j.target_chart[0] == 1
    assert np.isclose(j.u[0, 0], 0.25)

    try:
        mobius_pullback(m, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_constant_map():
    m = constant_map(np.inf)
    j = m.jets(NORTH, np.array([0.3, 0.7j]), order=1)
    assert np.all(j.target_chart == 1)
    assert np.allclose(j.u, 0.0)
    assert np.allclose(j.u_z, 0.0)

    m = constant_map(0.5)
    j = m.jets(SOUTH, np.array([0.2]))
    assert np.allclose(j.u, 0.5)


def test_map_family():
    family = shrinking_identity(schedule=(4, 8))
    assert family.schedule == (4, 8)
    assert np.isclose(family.parameter("lambda", 4), 0.25 / 64)
    ns = [n for n, _ in family.members()]
    assert ns == [4, 8]
    m = family.member(4)
    j = m.jets(NORTH, np.array([0.25 / 64]))
    assert np.isclose(j.u[0, 0], 1.0)

    description = family.with_schedule((2, 3)).describe()
    assert description["schedule"] == [2, 3]
    assert len(description["parameters"]["lambda"]) == 2

    for schedule in [(), (8, 4), (4, 4), (0, 1)]:
        try:
            family.with_schedule(schedule)
        except ValueError:
            pass
        else:
            raise AssertionError

    bad = MapFamily(lambda n: None)
    try:
        bad.member(1)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_families():
    assert set(FAMILIES) >= {"constant", "shrinking-identity", "two-bubble", "bubble-on-bubble"}

    m = two_bubble(0.0, 1.0).member(4)
    assert m.degree == 2

    try:
        two_bubble(0.5, 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError

    family = bubble_on_bubble()
    assert family.schedule == (4, 8, 16)
    assert family.member(4).degree == 2
