import numpy as np

from bubblelab.bubbletree import (
    BubbleConfig,
    BubbleTreeBuilder,
    build_tree,
    center_of_mass,
    cone_extension,
    curvature_dichotomy,
    detect_points,
    epsilon_n,
    lambda_n,
    renormalize,
)
from bubblelab.geometry import NORTH, ChartPoint, RoundSphere, RoundTarget
from bubblelab.maps import RationalMap, bubble_on_bubble, constant_family, constant_map, shrinking_identity, two_bubble

FOUR_PI = 4 * np.pi


def test_config():
    config = BubbleConfig()
    assert config.describe()["quadrature"]["n_points"] == 128

    for kwargs in [{"C_R": 4.0}, {"rho": 0.0}, {"grid": 2}, {"max_depth": 0}]:
        try:
            BubbleConfig(**kwargs)
        except ValueError:
            pass
        else:
            raise AssertionError


def test_scales_of_shrinking_identity():
    domain, target = RoundSphere(), RoundTarget()
    config = BubbleConfig()
    x = ChartPoint(NORTH, 0.0)
    n, lam_f = 4, 0.25 / 64
    u = RationalMap([0, 1.0 / lam_f], [1])

    # the limit at infinity has no energy near x
    eps = epsilon_n(constant_map(np.inf), x, n, FOUR_PI, config, domain, target)
    assert np.isclose(eps, 0.25)
    assert np.isclose(epsilon_n(None, x, 8, FOUR_PI, config), 0.125)

    c = center_of_mass(u, NORTH, 0.0, eps, domain, target, config.spec)
    assert abs(c) < 1e-10

    lam = lambda_n(u, NORTH, c, eps, config, domain, target)
    A = eps**2 / (lam_f**2 + eps**2)
    expected = lam_f * np.sqrt((A - 0.125) / (1.125 - A))
    assert np.isclose(lam, expected, rtol=1e-5)

    # D(0, eps) of the constant map carries no energy
    try:
        lambda_n(constant_map(0.5), NORTH, 0.0, eps, config, domain, target)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_renormalize():
    domain, target = RoundSphere(), RoundTarget()
    lam_f = 0.25 / 64
    u = RationalMap([0, 1.0 / lam_f], [1])
    lam = 2.0 * lam_f
    u_tilde, diag = renormalize(u, lam, 0.0)
    assert diag == {}
    j = u_tilde.jets(NORTH, np.array([0.5]))
    assert np.isclose(j.u[0, 0], 1.0)

    u_tilde, diag = renormalize(u, lam, 0.0, NORTH, 0.25, domain, target)
    assert diag["mass_residual"] < 1e-6
    assert diag["curvature_residual"] < 1e-6
    assert np.isclose(diag["mass"], FOUR_PI, rtol=1e-3)
    assert abs(diag["center"]) < 1e-8

    try:
        renormalize(u, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_cone_extension():
    target = RoundTarget()
    M = 64
    theta = 2 * np.pi * np.arange(M) / M
    a = np.arctan(0.1)
    patch = cone_extension(0.1 * np.exp(1j * theta)[None, :], np.array([0.0]), 0.5, target)
    # with the metric frozen at the cone point the cone is linear
    assert np.isclose(patch.energy, FOUR_PI * a**2, rtol=1e-6)
    assert np.isclose(patch.curvature, 2 * np.pi * a**2, rtol=1e-6)
    assert np.isclose(patch.max_velocity, 2 * a, rtol=1e-6)
    assert np.allclose(patch.evaluate(np.array([0.5])), 0.1, atol=1e-6)

    try:
        patch.evaluate(np.array([0.75]))
    except ValueError:
        pass
    else:
        raise AssertionError

    # the loop leaves the normal ball of radius pi / 2
    try:
        cone_extension(3.0 * np.exp(1j * theta)[None, :], np.array([0.0]), 0.5, target)
    except (ValueError, FloatingPointError):
        pass
    else:
        raise AssertionError


def test_detect_points():
    domain, target = RoundSphere(), RoundTarget()
    points = detect_points(shrinking_identity(schedule=(4, 8, 16)), domain, target)
    assert len(points) == 1
    p = points[0]
    assert p.location.chart == NORTH
    assert abs(p.location.coord) < 1e-6
    assert np.isclose(p.m, FOUR_PI, rtol=0.02)
    assert np.isclose(p.q, 2 * np.pi, rtol=0.02)

    # a lone concentration point carries the whole energy
    assert np.isclose(p.radius, 0.5)

    assert detect_points(constant_family(0.5, schedule=(4, 8)), domain, target) == []

    # one index cannot show the energy concentrating
    assert detect_points(shrinking_identity(schedule=(16,)), domain, target) == []

    try:
        detect_points(RationalMap([0, 1], [1]), domain, target)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_shrinking_identity_tree():
    family = shrinking_identity(schedule=(4, 8, 16, 32))
    builder = BubbleTreeBuilder().fit(family, RoundSphere(), RoundTarget())
    assert builder.passed_, builder.flags_
    tree = builder.tree_

    leaves = tree.leaves()
    assert len(leaves) == 1
    assert tree.depth == 1
    node = leaves[0]
    assert np.isclose(node.m, FOUR_PI, rtol=0.02)
    assert np.isclose(node.q, 2 * np.pi, rtol=0.02)
    assert node.nu <= 0.01 * node.m
    assert node.eta <= 0.01 * node.q

    last = node.reports[-1]
    assert last.n == 32
    assert last.neck_diameter <= 0.05
    assert last.zero_distance <= 0.05
    assert last.lambda_n <= last.eps_n / 32**2
    assert abs(last.split_ratio - 1.0) <= 0.05

    assert len(tree.identities) == 4
    assert all(np.isclose(row["E"], FOUR_PI, rtol=1e-4) for row in tree.identities)
    assert tree.energy_residuals()[-1] <= 0.01
    assert tree.curvature_residuals()[-1] <= 0.01

    # the limit bubble leaves no energy for the neck
    assert np.isclose(node.limit_energy, FOUR_PI, rtol=0.02)
    row = tree.identities[-1]
    assert abs(row["neck_implied"] - row["neck"]) <= 0.01 * row["E"]
    assert row["neck"] < 0.02 * FOUR_PI

    frame = tree.partition_frame()
    assert len(frame) == 4
    assert list(frame["node"].unique()) == ["b0"]
    assert np.all(frame["E_neck"] < 0.02 * FOUR_PI)

    graph = tree.to_graph()
    assert set(graph.nodes) == {"base", "b0"}

    report = builder.to_dict()
    assert report["check"] == "BubbleTreeBuilder"
    assert report["tree"]["leaves"] == 1


def test_two_bubble_tree():
    family = two_bubble(0.0, 1.0, schedule=(4, 8, 16, 32))
    tree = build_tree(family, RoundSphere(), RoundTarget())
    leaves = tree.leaves()
    assert len(leaves) == 2
    centers = sorted(leaf.location.coord.real for leaf in leaves)
    assert np.allclose(centers, [0.0, 1.0], atol=1e-3)
    for leaf in leaves:
        assert np.isclose(leaf.m, FOUR_PI, rtol=0.02)
        assert np.isclose(leaf.q, 2 * np.pi, rtol=0.02)
    assert np.isclose(tree.identities[-1]["E"], 2 * FOUR_PI, rtol=1e-4)
    assert tree.energy_residuals()[-1] <= 0.01


def test_constant_family_tree():
    builder = BubbleTreeBuilder().fit(constant_family(0.0, schedule=(4, 8)), RoundSphere(), RoundTarget())
    assert builder.passed_
    tree = builder.tree_
    assert tree.leaves() == []
    assert tree.depth == 0
    assert tree.partition_frame().empty
    assert tree.to_dict()["bubbles"] == []


def test_bubble_on_bubble():
    family = bubble_on_bubble()
    points = detect_points(family, RoundSphere(), RoundTarget())
    assert len(points) == 1
    # both bubbles concentrate at the origin
    assert np.isclose(points[0].m, 2 * FOUR_PI, rtol=0.02)
    assert np.isclose(points[0].q, FOUR_PI, rtol=0.02)


def test_curvature_dichotomy():
    domain, target = RoundSphere(), RoundTarget()
    family = shrinking_identity(schedule=(4, 8))

    report = curvature_dichotomy(family, domain, target, ChartPoint(NORTH, 0.5), 0.25)
    assert list(report.frame.columns) == ["n", "curvature_mass", "hypothesis", "lp_norm", "key_lemma"]
    assert report.hypothesis_holds
    assert report.bounded
    assert report.consistent

    report = curvature_dichotomy(family, domain, target, ChartPoint(NORTH, 0.0), 0.25)
    assert not report.hypothesis_holds
    assert report.consistent
    assert report.to_dict()["hypothesis_holds"] is False

    try:
        curvature_dichotomy(family, domain, target, 0.5, 0.25)
    except TypeError:
        pass
    else:
        raise AssertionError


def test_single_index_tree():
    builder = BubbleTreeBuilder().fit(shrinking_identity(schedule=(16,)), RoundSphere(), RoundTarget())
    assert not builder.passed_
    assert builder.tree_.leaves() == []
    assert any("single index" in f for f in builder.flags_)
