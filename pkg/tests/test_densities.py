import warnings

import numpy as np

from bubblelab.densities import (
    bochner_residual,
    curvature_density,
    curvature_density_special,
    density_field,
    density_report,
    energy_parts,
    energy_relations,
    harmonic_residual,
    positive_parts,
    pullback_kahler_form,
    sample_jets,
)
from bubblelab.geometry import (
    NORTH,
    SOUTH,
    EuclideanDomain,
    FlatTarget,
    FubiniStudyTarget,
    RoundSphere,
    RoundTarget,
    chart_lattice,
)
from bubblelab.maps import BipolynomialMap, ConjugateMap, RationalMap, veronese


def _disk(step=0.125):
    z = chart_lattice(step, 1.0, margin=0)
    return z[np.abs(z) <= 1.0]


def test_identity_on_round_sphere():
    domain, target = RoundSphere(), RoundTarget()
    m = RationalMap([0, 1], [1])
    for chart in (NORTH, SOUTH):
        j = m.jets(chart, _disk(), order=1)
        e_holo, e_anti = energy_parts(j, domain, target)
        assert np.allclose(e_holo, 1.0)
        assert np.allclose(e_anti, 0.0)

        q_holo, q_anti = curvature_density(j, domain, target)
        assert np.allclose(q_holo, 0.5)
        assert np.allclose(q_anti, -0.5)

        q1, q2, q = positive_parts(q_holo, q_anti)
        assert np.allclose(q1, 0.5) and np.allclose(q2, 0.0) and np.allclose(q, 0.5)

        form = pullback_kahler_form(j, target)
        assert np.allclose(form, domain.conformal_factor(chart, j.coord))


def test_antiholomorphic_curve_densities():
    domain, target = RoundSphere(), RoundTarget()
    m = ConjugateMap(RationalMap([0, 0, 1], [1]))
    j = m.jets(NORTH, _disk(), order=1)
    e_holo, e_anti = energy_parts(j, domain, target)
    assert np.allclose(e_holo, 0.0)

    q_holo, q_anti, sigma = curvature_density_special(j, domain, target, "curve")
    assert sigma is None
    assert np.allclose(q_anti, 0.5 * e_anti)
    assert np.allclose(q_holo, -0.5 * e_anti)

    q_holo, q_anti, _ = curvature_density_special(j, domain, target, "antiholomorphic")
    assert np.allclose(q_anti, 0.5 * e_anti)

    try:
        curvature_density_special(j, domain, target, "holomorphic")
    except ValueError:
        pass
    else:
        raise AssertionError


def test_seam_agreement():
    domain, target = RoundSphere(), RoundTarget()
    m = RationalMap([0, 0, 1], [1])
    theta = np.linspace(0.0, 2 * np.pi, 17)
    z = np.exp(1j * theta)
    north = density_report(m.jets(NORTH, z, order=1), domain, target)
    south = density_report(m.jets(SOUTH, 1.0 / z, order=1), domain, target)
    assert np.allclose(north.e_holo, 4.0)
    assert np.allclose(north.e_holo, south.e_holo, rtol=1e-12)
    assert np.allclose(north.q_holo, south.q_holo, rtol=1e-12)


def test_cauchy_schwarz_margin():
    domain, target = RoundSphere(), RoundTarget()
    for m in [RationalMap([1, 0, 0, 1], [0, 1]), ConjugateMap(RationalMap([0, 0, 1], [1]))]:
        report = density_report(m.jets(NORTH, _disk(), order=1), domain, target)
        assert np.all(report.cs_margin[0] >= -1e-12)
        assert np.all(report.cs_margin[1] >= -1e-12)
        assert np.all((report.sigma >= -1e-9) & (report.sigma <= 0.5 + 1e-9) | np.isnan(report.sigma))


def test_flat_target():
    domain, target = EuclideanDomain(), FlatTarget()
    m = BipolynomialMap([{(1, 0): 1.0, (0, 1): 0.5, (2, 1): 0.1}])
    j = m.jets(NORTH, _disk())
    q_holo, q_anti = curvature_density(j, domain, target)
    assert np.allclose(q_holo, 0.0) and np.allclose(q_anti, 0.0)

    report = density_report(j, domain, target)
    assert report.sigma is None
    assert np.allclose(report.omega_norm, 0.0)

    # u = z + 0.5 conj(z): e' = 1, e'' = 0.25 away from the cubic term
    j = BipolynomialMap([{(1, 0): 1.0, (0, 1): 0.5}]).jets(NORTH, _disk())
    e_holo, e_anti = energy_parts(j, domain, target)
    assert np.allclose(e_holo, 1.0) and np.allclose(e_anti, 0.25)
    assert np.allclose(pullback_kahler_form(j, target), 0.75)


def test_veronese_into_projective_space():
    domain, target = RoundSphere(), FubiniStudyTarget(2, c=1.0)
    j = veronese(2).jets(NORTH, _disk(), order=2)
    e_holo, e_anti = energy_parts(j, domain, target)
    assert np.allclose(e_anti, 0.0)

    q_holo, q_anti = curvature_density(j, domain, target)
    assert np.allclose(q_holo, 0.5 * e_holo)

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        q1, _, _ = curvature_density_special(j, domain, target, "holomorphic")
    assert np.allclose(q1, q_holo)

    report = density_report(j, domain, target)
    # one-sided energy: sigma is not defined
    assert np.all(np.isnan(report.sigma))

    try:
        curvature_density_special(j, domain, target, "curve")
    except ValueError:
        pass
    else:
        raise AssertionError


def test_sigma_with_both_energy_parts():
    domain, target = RoundSphere(), FubiniStudyTarget(2, c=4.0)
    z = _disk()
    # u = (z, conj z): u_z and u_zb span the plane, h(u_z, u_zb) = -conj(z)^2 / (1 + 2|z|^2)^2 up to 4/c
    j = BipolynomialMap([{(1, 0): 1.0}, {(0, 1): 1.0}]).jets(NORTH, z, order=2)
    report = density_report(j, domain, target)
    assert np.all(np.isfinite(report.sigma))
    assert np.all((report.sigma > 0.0) & (report.sigma <= 0.5 + 1e-9))
    r2 = np.abs(z) ** 2
    assert np.allclose(report.sigma, 0.5 * (1.0 - r2**2 / (1.0 + r2) ** 2), atol=1e-8)
    assert np.isclose(report.sigma[np.argmin(r2)], 0.5, atol=1e-4)


def test_energy_relations():
    domain = RoundSphere()
    for m, target in [
        (RationalMap([0, 0, 1], [1]), RoundTarget()),
        (ConjugateMap(RationalMap([0, 0, 1], [1])), RoundTarget()),
        (BipolynomialMap([{(1, 0): 1.0}, {(0, 1): 1.0}]), FubiniStudyTarget(2, c=4.0)),
    ]:
        energy, form, scale = energy_relations(m.jets(NORTH, _disk(), order=1), domain, target)
        assert scale > 0
        assert np.max(energy) <= 1e-9 * scale
        assert np.max(form) <= 1e-9 * scale


def test_direction_at_higher_order_zero():
    domain, target = RoundSphere(), FubiniStudyTarget(2, c=4.0)
    # u = (z^3, conj z): u_z and u_zz both vanish at the origin, u_zb does not
    m = BipolynomialMap([{(3, 0): 1.0}, {(0, 1): 1.0}])
    origin = np.array([0j])
    q_holo, _, missing, _ = curvature_density(m.jets(NORTH, origin, order=2), domain, target, return_missing=True)
    assert missing[0]
    assert q_holo[0] == 0.0
    q_holo, _, missing, _ = curvature_density(sample_jets(m, NORTH, origin, order=2), domain, target, return_missing=True)
    assert not missing[0]
    assert np.isclose(q_holo[0], -0.25, atol=1e-6)
    for t in (1e-3, 1e-2):
        rays = t * np.exp(1j * np.array([0.0, 1.0, 2.5]))
        q_holo, _ = curvature_density(m.jets(NORTH, rays, order=2), domain, target)
        assert np.allclose(q_holo, -0.25, atol=1e-3)


def test_dimension_mismatch():
    j = veronese(2).jets(NORTH, _disk(), order=1)
    try:
        energy_parts(j, RoundSphere(), RoundTarget())
    except ValueError:
        pass
    else:
        raise AssertionError


def test_harmonic_residual():
    target = RoundTarget()
    j = RationalMap([1, 0, 0, 1], [0, 1]).jets(NORTH, _disk(), order=2)
    assert np.max(harmonic_residual(j, target)) < 1e-10

    # |z|^2 is not harmonic
    j = BipolynomialMap([{(1, 1): 1.0}]).jets(NORTH, _disk(), order=2)
    assert np.allclose(harmonic_residual(j, FlatTarget()), 1.0)

    j = BipolynomialMap([{(1, 1): 1.0}]).jets(NORTH, _disk(), order=1)
    try:
        harmonic_residual(j, FlatTarget())
    except ValueError:
        pass
    else:
        raise AssertionError


def test_density_field():
    field = density_field(RationalMap([0, 1], [1]), RoundSphere(), RoundTarget(), step=0.125)
    assert list(field.columns) == ["chart", "re", "im", "e_holo", "e_anti", "q_holo", "q_anti", "q_plus", "sigma"]
    assert set(field["chart"]) == {NORTH, SOUTH}
    assert np.allclose(field["e_holo"], 1.0)
    assert np.allclose(field["q_plus"], 0.5)
    # the south chart owns the open disk only
    south = field[field["chart"] == SOUTH]
    assert np.all(np.hypot(south["re"], south["im"]) < 1.0)

    field = density_field(BipolynomialMap([{(1, 0): 1.0}]), EuclideanDomain(), FlatTarget(), step=0.125)
    assert set(field["chart"]) == {NORTH}


def test_bochner_identity_for_identity_map():
    fields = bochner_residual(RationalMap([0, 1], [1]), RoundSphere(), RoundTarget(), step=1.0 / 16)
    assert fields.sup("beta_holo_sq") < 1e-12
    assert fields.sup("residual_e_holo") < 1e-9
    assert fields.sup("residual_e_anti") < 1e-9
    assert np.isnan(fields.observed_order)
    assert fields.flags == []


def test_bochner_residual_converges():
    fields = bochner_residual(RationalMap([0, 0, 1], [1]), RoundSphere(), RoundTarget(), step=1.0 / 32)
    assert fields.sup("residual_e_holo") < 5e-2
    assert 3.0 <= fields.observed_order <= 5.0
    assert fields.flags == []

    try:
        bochner_residual(RationalMap([0, 1], [1]), RoundSphere(), RoundTarget(), chart="east")
    except ValueError:
        pass
    else:
        raise AssertionError
