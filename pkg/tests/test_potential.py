import numpy as np

from bubblelab.geometry import chart_lattice
from bubblelab.potential import (
    DiskMeasure,
    KeyLemmaCheck,
    P1Check,
    P2Check,
    key_lemma_check,
    log_potential,
    p1_check,
    p2_check,
    random_disk_measure,
)


def test_disk_measure():
    mu = DiskMeasure([(0.0, 1.0), (0.5j, 2.0)])
    assert np.isclose(mu.mass(), 3.0)
    assert np.isclose(mu.scaled(2.0).mass(), 6.0)

    step = 1.0 / 16
    nu = DiskMeasure.from_density(lambda z: np.ones(z.shape), step)
    assert np.isclose(nu.mass(), np.pi, rtol=5e-2)
    assert np.isclose((mu + nu).mass(), mu.mass() + nu.mass())
    assert nu.describe()["step"] == step

    for atoms in [[(0.0, -1.0)], [(1.5, 1.0)]]:
        try:
            DiskMeasure(atoms)
        except ValueError:
            pass
        else:
            raise AssertionError

    try:
        DiskMeasure(density=np.ones((3, 3)), step=step)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        DiskMeasure(density=np.ones((3, 3)))
    except ValueError:
        pass
    else:
        raise AssertionError


def test_log_potential():
    mu = DiskMeasure([(0.0, 2 * np.pi)])
    assert np.isclose(log_potential(mu, 0.5), np.log(2.0))
    assert np.allclose(log_potential(mu, np.array([1.0, 1j])), 0.0)

    try:
        log_potential(mu, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError

    # a lattice density of total mass 2 pi looks like an atom from afar
    step = 1.0 / 32
    z = chart_lattice(step, 1.0, margin=0)
    density = np.where(np.abs(z) <= 0.1, 1.0, 0.0)
    nu = DiskMeasure(density=density, step=step)
    nu = nu.scaled(2 * np.pi / nu.mass())
    assert np.isclose(log_potential(nu, 0.9), -np.log(0.9), atol=1e-2)


def test_p1_single_atom():
    mu = DiskMeasure([(0.0, np.pi)])
    check = P1Check(1.0).fit(mu)
    assert check.passed_
    report = check.report_
    item = report.inequalities[0]
    assert item["name"] == "exponential_integrability"
    assert np.isclose(item["lhs"], 4 * np.pi / 3, rtol=1e-3)
    assert np.isclose(item["rhs"], 4 * np.pi / 3 * 2 ** 1.5)
    assert np.isclose(report.norms["e_v_Lp"], item["lhs"])

    report = p1_check(DiskMeasure([(0.3 + 0.2j, 1.0), (-0.4, 0.5)]), 2.0)
    assert report.holds

    summary = check.to_dict()
    assert summary["check"] == "P1Check"
    assert summary["passed"]


def test_p1_invalid():
    try:
        P1Check(0.5)
    except ValueError:
        pass
    else:
        raise AssertionError

    for mu in [DiskMeasure(), DiskMeasure([(0.0, 4 * np.pi)])]:
        try:
            P1Check(1.0).fit(mu)
        except ValueError:
            pass
        else:
            raise AssertionError


def test_p1_random_measures():
    for seed in range(500):
        mu = random_disk_measure(n_atoms=5, total_mass=2.0, random_state=seed)
        assert np.isclose(mu.mass(), 2.0)
        check = P1Check(2.0, n_radial=64, n_angular=128).fit(mu)
        assert check.passed_, seed


def test_p2():
    report = p2_check(lambda z: np.zeros(np.shape(z)), 0.0)
    item = report.inequalities[0]
    assert item["name"] == "schwarz_lemma"
    assert np.isclose(item["lhs"], 1.0)
    assert np.isclose(item["rhs"], 1.0, rtol=1e-6)
    assert report.holds

    check = P2Check().fit(lambda z: np.abs(z) ** 2, 0.5)
    assert check.passed_

    # the same function given on the lattice
    step = 1.0 / 64
    z = chart_lattice(step, 1.0, margin=1)
    check = P2Check(step).fit(np.abs(z) ** 2, 0.5)
    assert check.passed_
    assert np.isclose(check.report_.inequalities[0]["lhs"], np.exp(0.25), rtol=1e-3)


def test_p2_invalid():
    try:
        P2Check().fit(lambda z: -np.abs(z) ** 2, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        P2Check().fit(lambda z: np.zeros(np.shape(z)), 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        P2Check(1.0 / 64).fit(np.zeros((5, 5)), 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError


def test_key_lemma_harmonic():
    check = KeyLemmaCheck(1.0, step=1.0 / 32).fit(lambda z: np.real(z))
    assert check.kappa_ == 0.0
    assert check.passed_
    names = [item["name"] for item in check.report_.inequalities]
    assert names == ["potential_lower_bound", "jensen_step", "schwarz_lemma_half_disk", "composite"]


def test_key_lemma_quadratic():
    report = key_lemma_check(lambda z: -0.5 * np.abs(z) ** 2, 1.0, step=1.0 / 32)
    assert np.isclose(report.kappa, 2 * np.pi, rtol=2e-2)
    assert report.holds
    names = [item["name"] for item in report.inequalities]
    assert names == [
        "potential_lower_bound",
        "jensen_step",
        "schwarz_lemma_half_disk",
        "exponential_integrability",
        "composite",
    ]
    assert report.norms["constant"] > 0


def test_key_lemma_invalid():
    # kappa = 8 pi
    try:
        KeyLemmaCheck(1.0, step=1.0 / 32).fit(lambda z: -2.0 * np.abs(z) ** 2)
    except ValueError:
        pass
    else:
        raise AssertionError

    # 4 pi / kappa = 2
    try:
        KeyLemmaCheck(3.0, step=1.0 / 32).fit(lambda z: -0.5 * np.abs(z) ** 2)
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        KeyLemmaCheck(1.0).report_
    except RuntimeError:
        pass
    else:
        raise AssertionError
