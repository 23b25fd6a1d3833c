import numpy as np

from bubblelab.geometry import (
    NORTH,
    SOUTH,
    ChartPoint,
    ConformalDomain,
    FlatTarget,
    FubiniStudyTarget,
    PerturbedRoundTarget,
    RoundSphere,
    RoundTarget,
    _BaseKahlerTarget,
    affine_coordinates,
    chart_lattice,
    curvature_operator_norm,
    curvature_tensor,
    euclidean_laplacian,
    numerical_gauss_curvature,
    to_homogeneous,
    transition,
)


def test_transition():
    p = ChartPoint(NORTH, 2.0)
    q = transition(p)
    assert q.chart == SOUTH and np.isclose(q.coord, 0.5)
    assert transition(q) == ChartPoint(NORTH, 2.0)
    assert p.canonical() == q
    assert q.canonical() == q

    # the other chart's infinity
    try:
        transition(ChartPoint(NORTH, 0.0))
    except ValueError:
        pass
    else:
        raise AssertionError


def test_chart_point_invalid():
    try:
        ChartPoint("east", 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        ChartPoint(NORTH, np.inf)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_homogeneous_coordinates():
    Z = to_homogeneous(np.array([[2.0 + 0j]]), 0)
    assert np.allclose(Z[:, 0], [1.0, 2.0])

    u, chart = affine_coordinates(Z)
    assert chart[0] == 1
    assert np.isclose(u[0, 0], 0.5)

    u0 = affine_coordinates(Z, 0)
    assert np.isclose(u0[0, 0], 2.0)

    try:
        affine_coordinates(np.array([[0.0], [1.0]]), 0)
    except FloatingPointError:
        pass
    else:
        raise AssertionError


def test_round_sphere():
    domain = RoundSphere()
    assert np.isclose(domain.conformal_factor(NORTH, 0.0), 4.0)
    assert np.isclose(domain.conformal_factor(SOUTH, 1.0), 1.0)

    z, K = numerical_gauss_curvature(domain, step=1.0 / 32)
    assert z.size > 0
    assert np.max(np.abs(K - 1.0)) < 1e-2

    try:
        RoundSphere(curvature=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_conformal_domain():
    base = RoundSphere()
    domain = ConformalDomain(base, lambda z: np.full(np.shape(z), 0.5))
    z = np.array([0.0, 0.3 + 0.4j, 1.0])
    assert np.allclose(domain.conformal_factor(NORTH, z), np.e * base.conformal_factor(NORTH, z))
    assert np.allclose(domain.gauss_curvature(NORTH, z), np.exp(-1.0))
    assert np.allclose(domain.log_factor_derivative(NORTH, z), base.log_factor_derivative(NORTH, z))

    try:
        ConformalDomain(base, 0.5)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_targets():
    u = np.array([[0.0, 0.5 + 0.5j, 2.0]])
    chart = np.zeros(3, dtype=int)

    round_target = RoundTarget()
    assert np.allclose(round_target.curvature_operator_norm(u, chart), 0.5)
    assert np.isclose(round_target.max_curvature_operator_norm(), 0.5)
    assert np.isclose(round_target.max_holomorphic_curvature(), 1.0)
    assert np.isclose(round_target.injectivity_radius(), np.pi)

    # CP^1 with c = 1 is the unit round sphere
    fs = FubiniStudyTarget(1, c=1.0)
    assert np.allclose(curvature_tensor(fs, u, chart), curvature_tensor(round_target, u, chart))
    assert np.allclose(curvature_operator_norm(fs, u, chart), 0.5)

    flat = FlatTarget()
    assert np.allclose(curvature_tensor(flat, u, chart), 0.0)
    assert flat.max_holomorphic_curvature() == 0.0
    assert np.isinf(flat.injectivity_radius())


def test_fubini_study_holomorphic_sectional_curvature():
    np.random.seed(0)
    for n, c in [(2, 1.0), (3, 2.5)]:
        target = FubiniStudyTarget(n, c)
        u = np.random.normal(size=(n, 10)) + 1j * np.random.normal(size=(n, 10))
        X = np.random.normal(size=(n, 10)) + 1j * np.random.normal(size=(n, 10))
        chart = np.zeros(10, dtype=int)
        H = target.holomorphic_sectional_curvature(u, chart, X)
        assert np.allclose(H, c)
        assert np.isclose(target.max_curvature_operator_norm(), c * (n + 1) / 4.0)
        assert np.all(target.curvature_operator_norm(u, chart) <= c * (n + 1) / 4.0 + 1e-9)


def test_perturbed_round_target():
    target = PerturbedRoundTarget(amplitude=1.5)
    K = target.gauss_curvature(np.array([0.0]), np.array([0]))
    assert K[0] < 0
    # same point seen from both charts
    u = np.array([0.5 + 0.5j])
    k0 = target.gauss_curvature(u, np.array([0]))
    k1 = target.gauss_curvature(1.0 / u, np.array([1]))
    assert np.allclose(k0, k1)


def test_max_holomorphic_curvature_required():
    class Incomplete(_BaseKahlerTarget):
        def metric(self, u, chart):
            return np.ones((1, 1) + np.shape(chart))

        def christoffel(self, u, chart):
            return np.zeros((1, 1, 1) + np.shape(chart))

        def curvature_tensor(self, u, chart):
            return np.zeros((1, 1, 1, 1) + np.shape(chart))

        def distance(self, Z, W):
            return np.zeros(np.shape(Z)[1:])

        def injectivity_radius(self):
            return np.inf

    try:
        Incomplete()
    except TypeError:
        pass
    else:
        raise AssertionError
    for target in [RoundTarget(2.0), FlatTarget(), PerturbedRoundTarget(0.3), FubiniStudyTarget(2, c=4.0)]:
        assert np.isfinite(target.max_holomorphic_curvature())


def test_perturbed_distance():
    flat_bump = PerturbedRoundTarget(amplitude=0.0)
    Z = to_homogeneous(np.array([[0.0, 0.5, 2.0j]]), 0)
    W = to_homogeneous(np.array([[1.0, 0.5j, -0.3]]), 0)
    assert np.allclose(flat_bump.distance(Z, W), RoundTarget().distance(Z, W))

    target = PerturbedRoundTarget(amplitude=0.3)
    assert not target.distance_is_exact and RoundTarget().distance_is_exact
    bound = target.distance(Z, W)
    assert np.all(bound <= np.exp(0.3) * RoundTarget().distance(Z, W) + 1e-12)
    assert np.all(bound >= RoundTarget().distance(Z, W) - 1e-12)
    # arcs through u = 0 are meridians, which stay geodesic
    origin = to_homogeneous(np.array([[0.0, 0.0]]), 0)
    end = to_homogeneous(np.array([[0.4, 0.7j]]), 0)
    assert np.allclose(target.geodesic_distance(origin, end), target.distance(origin, end), rtol=1e-4)
    exact = target.geodesic_distance(Z[:, 1:2], W[:, 1:2])
    assert exact[0] <= target.distance(Z[:, 1:2], W[:, 1:2])[0] * (1 + 1e-6)
    assert np.isclose(target.distance(Z, Z)[0], 0.0, atol=1e-6)


def test_distance():
    target = RoundTarget()
    Z = to_homogeneous(np.array([[0.0 + 0j]]), 0)
    W = to_homogeneous(np.array([[1.0 + 0j]]), 0)
    assert np.isclose(target.distance(Z, W)[0], np.pi / 2)
    assert np.isclose(target.distance(Z, Z)[0], 0.0)


def test_exponential_and_log_map():
    target = RoundTarget()
    u0 = np.array([0.0 + 0j])
    v = np.array([[0.3 + 0j, 0.2j]])
    # geodesics from 0 reach |u| = tan |v|
    u = target.exponential_map(u0, 0, v)
    assert np.allclose(u, np.tan(np.abs(v)) * v / np.abs(v), atol=1e-6)

    back = target.log_map(u0, 0, u)
    assert np.allclose(back, v, atol=1e-6)


def test_chart_lattice():
    z = chart_lattice(0.25, 1.0, margin=0)
    assert z.shape == (9, 9)
    assert z[0, 0] == -1 - 1j
    assert z[0, 8] == 1 - 1j

    z = chart_lattice(0.25, 1.0)
    assert z.shape == (13, 13)

    try:
        chart_lattice(0.0)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_euclidean_laplacian():
    z = chart_lattice(1.0 / 16, 1.0)
    lap = euclidean_laplacian(np.abs(z) ** 2, 1.0 / 16)
    assert np.all(np.isnan(lap[0, :])) and np.all(np.isnan(lap[:, -1]))
    assert np.allclose(lap[1:-1, 1:-1], 4.0)

    lap2 = euclidean_laplacian(np.abs(z) ** 2, 1.0 / 16, stride=2)
    assert np.allclose(lap2[2:-2, 2:-2], 4.0)
