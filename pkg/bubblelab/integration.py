"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.utils import check_scalar

from .base import _BaseCheck
from .densities import E_FLOOR, curvature_density, energy_parts
from .geometry import CHARTS, ChartPoint, ConformalDomain, _check_chart, smooth_cutoff, to_chart
from .maps import ANTIHOLOMORPHIC, HOLOMORPHIC, ConjugateMap, ramification

__all__ = [
    "QuadratureSpec",
    "SphericalMeasure",
    "Totals",
    "density_function",
    "integrate",
    "integrate_disk",
    "totals",
    "Theorem1Check",
    "theorem1_check",
    "EnergyBoundsCheck",
    "energy_bounds_check",
    "ConformalInvarianceCheck",
    "conformal_invariance_check",
    "atom_fit",
    "disk_mass_table",
]

logger = logging.getLogger(__name__)

RULES = ("midpoint", "simpson", "gauss")

_CHUNK = 1 << 16


class QuadratureSpec:
    """Polar quadrature on the closed unit disk of each chart.

    Parameters
    ----------
    n_points : int, optional (default=256)
        Number of radial nodes; ``2 * n_points`` uniform angles are used.
    rule : str, optional (default="gauss")
        Radial rule: ``"midpoint"``, ``"simpson"`` or ``"gauss"``
        (Gauss-Legendre).
    panel_nodes : int, optional (default=16)
        Gauss-Legendre nodes per unit of ``log r`` on log-graded disks.
    decades : float, optional (default=10)
        Depth of log-graded disks, in powers of ten of their radius.
    """

    def __init__(self, n_points=256, rule="gauss", panel_nodes=16, decades=10.0):
        self.n_points = check_scalar(n_points, "n_points", (int, np.integer), min_val=16)
        if rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {rule!r}.")
        if rule == "simpson" and n_points % 2:
            raise ValueError("n_points must be even for the simpson rule.")
        self.rule = rule
        self.panel_nodes = check_scalar(panel_nodes, "panel_nodes", (int, np.integer), min_val=2)
        self.decades = check_scalar(decades, "decades", (float, int), min_val=1)

    def radial_nodes(self, radius=1.0):
        """Radial nodes on ``[0, radius]`` and weights including ``r dr``."""
        N = self.n_points
        if self.rule == "midpoint":
            x = (np.arange(N) + 0.5) / N
            w = np.full(N, 1.0 / N)
        elif self.rule == "simpson":
            x = np.linspace(0.0, 1.0, N + 1)
            w = np.ones(N + 1)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            w *= 1.0 / (3.0 * N)
        else:
            x, w = np.polynomial.legendre.leggauss(N)
            x = 0.5 * (x + 1.0)
            w = 0.5 * w
        r = radius * x
        return r, radius * w * r

    def angular_nodes(self, n_angles=None):
        M = 2 * self.n_points if n_angles is None else n_angles
        theta = 2.0 * np.pi * (np.arange(M) + 0.5) / M
        return theta, np.full(M, 2.0 * np.pi / M)

    def disk_nodes(self, radius=1.0):
        """Flattened points and weights on the disk ``|z| <= radius``."""
        r, wr = self.radial_nodes(radius)
        theta, wt = self.angular_nodes()
        z = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
        return z, (wr[:, None] * wt[None, :]).ravel()

    def log_disk_nodes(self, center, radius, inner_radius=0.0, n_angles=None):
        """Points and weights on a disk graded logarithmically towards its center.

        The radial variable ``t = log r`` is integrated with composite
        Gauss-Legendre panels of unit length. Without ``inner_radius`` the
        innermost ``10**-decades`` of the radius is covered by a small
        Gauss-Legendre disk.
        """
        lo = inner_radius if inner_radius > 0 else radius * 10.0 ** (-self.decades)
        if not 0 < lo < radius:
            raise ValueError("inner_radius must lie in (0, radius).")
        t0, t1 = np.log(lo), np.log(radius)
        n_panels = int(np.ceil(t1 - t0))
        edges = np.linspace(t0, t1, n_panels + 1)
        x, w = np.polynomial.legendre.leggauss(self.panel_nodes)
        half = 0.5 * np.diff(edges)
        t = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
        wt = (half[:, None] * w[None, :]).ravel()
        r = np.exp(t)
        wr = wt * r**2
        if inner_radius <= 0:
            xi, wi = np.polynomial.legendre.leggauss(8)
            ri = 0.5 * lo * (xi + 1.0)
            r = np.concatenate([ri, r])
            wr = np.concatenate([0.5 * lo * wi * ri, wr])
        M = n_angles if n_angles is not None else min(2 * self.n_points, 256)
        theta, wth = self.angular_nodes(M)
        z = (complex(center) + r[:, None] * np.exp(1j * theta[None, :])).ravel()
        return z, (wr[:, None] * wth[None, :]).ravel()

    def describe(self):
        return {"n_points": int(self.n_points), "rule": self.rule}


def _accumulate(density, domain, chart, z, w, factor=None, chunk=_CHUNK):
    """Chunked sum of ``density * g * w``; density samples are last-axis."""
    total = None
    for start in range(0, z.size, chunk):
        zc = z[start:start + chunk]
        values = np.asarray(density(chart, zc))
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values.reshape(-1, zc.size)))[0, -1]
            raise FloatingPointError(f"non-finite density sample at {ChartPoint(chart, zc[bad])}")
        weights = w[start:start + chunk] * domain.conformal_factor(chart, zc)
        if factor is not None:
            weights = weights * factor(chart, zc)
        part = np.real(values) @ weights
        total = part if total is None else total + part
    return total


def _focus_weight(focus):
    """Sum of smooth bumps, one per focus disk, as a function on the sphere."""

    def weight(chart, z):
        out = np.zeros(np.shape(z))
        for p, radius in focus:
            zp = to_chart(chart, z, p.chart)
            with np.errstate(invalid="ignore", over="ignore"):
                out += np.nan_to_num(smooth_cutoff(np.abs(zp - p.coord) / radius, 0.5, 1.0))
        return out

    return weight


def _check_focus(focus):
    focus = [(p, float(r)) for p, r in focus]
    for p, r in focus:
        if not isinstance(p, ChartPoint):
            raise TypeError("focus points must be ChartPoint instances.")
        if not r > 0:
            raise ValueError("focus radii must be positive.")
    for i, (p, r) in enumerate(focus):
        for q, s in focus[i + 1:]:
            if q.chart != p.chart and q.coord == 0:
                continue
            zq = q.coord if q.chart == p.chart else 1.0 / q.coord
            if abs(zq - p.coord) < r + s:
                raise ValueError(f"focus disks around {p} and {q} overlap.")
    return focus


def integrate(density, domain, spec=None, focus=None):
    """Integrate a density against the area form of the domain sphere.

    Parameters
    ----------
    density : callable
        ``density(chart, z)`` for a 1-d array ``z``; returns an array whose
        last axis runs over the points.
    domain : domain surface
    spec : QuadratureSpec, optional
        Defaults to ``QuadratureSpec()``.
    focus : list of (ChartPoint, float), optional (default=None)
        Disjoint disks around concentration points. A smooth partition of
        unity moves the mass near each center to a log-graded disk.

    Returns
    -------
    value : float or ndarray
        Sum over both charts of the closed unit disk integrals.
    """
    if not callable(density):
        raise TypeError("density must be callable.")
    spec = QuadratureSpec() if spec is None else spec
    focus = _check_focus(focus or [])
    z, w = spec.disk_nodes()
    outer = None
    if focus:
        bump = _focus_weight(focus)

        def outer(chart, x):
            return 1.0 - bump(chart, x)

    total = 0.0
    for chart in CHARTS:
        total = total + _accumulate(density, domain, chart, z, w, outer)
    for p, radius in focus:
        inner = _focus_weight([(p, radius)])
        total = total + integrate_disk(density, domain, p.chart, p.coord, radius, spec, factor=inner)
    return total


def integrate_disk(density, domain, chart, center, radius, spec=None, inner_radius=0.0, factor=None):
    """Integrate over a disk or annulus of one chart on a log-graded grid.

    Parameters
    ----------
    density : callable
        As in :func:`integrate`.
    domain : domain surface
    chart : str
    center : complex
        Chart coordinate of the center; the disk may extend past ``|z| = 1``.
    radius : float
    spec : QuadratureSpec, optional
    inner_radius : float, optional (default=0)
        Integrate over the annulus ``inner_radius < |z - center| < radius``.
    factor : callable, optional
        Extra weight ``factor(chart, z)``.

    Returns
    -------
    value : float or ndarray
    """
    _check_chart(chart)
    spec = QuadratureSpec() if spec is None else spec
    check_scalar(radius, "radius", (float, int, np.floating), min_val=0.0, include_boundaries="neither")
    z, w = spec.log_disk_nodes(center, radius, inner_radius)
    return _accumulate(density, domain, chart, z, w, factor)


def density_function(m, domain, target, quantities=("e",), floor=E_FLOOR):
    """Density contract of a map for :func:`integrate`.

    Parameters
    ----------
    m : map
    domain : domain surface
    target : Kahler target
    quantities : tuple of str, optional (default=("e",))
        Any of ``e, e_holo, e_anti, q_holo, q_anti, q_plus_holo,
        q_plus_anti, q_plus``.
    floor : float, optional (default=1e-12)

    Returns
    -------
    density : callable
        Returns an array of shape ``(len(quantities), n_points)``.
    """
    known = ("e", "e_holo", "e_anti", "q_holo", "q_anti", "q_plus_holo", "q_plus_anti", "q_plus")
    for q in quantities:
        if q not in known:
            raise ValueError(f"unknown density {q!r}.")
    need_q = any(q.startswith("q") for q in quantities)
    order = 2 if (need_q and target.dim > 1) else 1

    def density(chart, z):
        j = m.jets(chart, z, order)
        e1, e2 = energy_parts(j, domain, target)
        fields = {"e": e1 + e2, "e_holo": e1, "e_anti": e2}
        if need_q:
            q1, q2 = curvature_density(j, domain, target, floor)
            fields.update(
                q_holo=q1,
                q_anti=q2,
                q_plus_holo=np.maximum(q1, 0.0),
                q_plus_anti=np.maximum(q2, 0.0),
                q_plus=np.maximum(q1, 0.0) + np.maximum(q2, 0.0),
            )
        return np.stack([fields[q] for q in quantities])

    return density


@dataclass
class Totals:
    """Global energy and positive curvature masses."""

    E: float
    Q_plus_holo: float
    Q_plus_anti: float
    Q_plus: float

    def to_dict(self):
        return asdict(self)


def totals(m, domain, target, spec=None, focus=None):
    """Energy ``E`` and the positive curvature totals ``Q'_+, Q''_+, Q_+``."""
    density = density_function(m, domain, target, ("e", "q_plus_holo", "q_plus_anti"))
    E, q1, q2 = integrate(density, domain, spec, focus)
    logger.debug("totals: E=%.10g Q'+=%.10g Q''+=%.10g", E, q1, q2)
    return Totals(float(E), float(q1), float(q2), float(q1 + q2))


class Theorem1Check(_BaseCheck):
    """Lower bound for the positive curvature mass of a holomorphic map.

    ``Q'_+ >= pi (sum r'_i + 2 - 2 genus)`` with ``r'_i`` the ramification
    multiplicities. Antiholomorphic maps are checked through ``Q''_+``.
    On spheres ``Q'_+ >= 2 pi`` is checked as well.

    Parameters
    ----------
    spec : QuadratureSpec, optional
    genus : int, optional (default=0)
    tolerance : float, optional (default=1e-5)
        Relative slack allowed.
    """

    def __init__(self, spec=None, genus=0, tolerance=1e-5):
        super().__init__(tolerance)
        self._spec = QuadratureSpec() if spec is None else spec
        self._genus = check_scalar(genus, "genus", (int, np.integer), min_val=0)

    def fit(self, m, domain, target):
        """Integrate the curvature density and compare with the bound.

        Parameters
        ----------
        m : RationalMap or ConjugateMap
            Non-constant holomorphic or antiholomorphic map.
        domain : domain surface
        target : Kahler target

        Returns
        -------
        self : object
        """
        if m.kind not in (HOLOMORPHIC, ANTIHOLOMORPHIC):
            raise ValueError("theorem1_check requires a holomorphic or antiholomorphic map.")
        self._mirrored = isinstance(m, ConjugateMap) or m.kind == ANTIHOLOMORPHIC
        self._points = ramification(m)
        self._totals = totals(m, domain, target, self._spec)
        Q = self._totals.Q_plus_anti if self._mirrored else self._totals.Q_plus_holo
        self._Q = Q
        self._bound = np.pi * (sum(r for _, r in self._points) + 2 - 2 * self._genus)
        self._slack = Q - self._bound
        allowed = self._tolerance * max(abs(Q), 1.0)
        passed = self._slack >= -allowed
        if self._genus == 0:
            passed = passed and Q >= 2 * np.pi - allowed
        self._passed = bool(passed)
        logger.info("theorem 1: Q=%.8g bound=%.8g slack=%.3e", Q, self._bound, self._slack)
        return self

    @property
    def slack_(self):
        self._check_is_fitted()
        return self._slack

    @property
    def bound_(self):
        self._check_is_fitted()
        return self._bound

    @property
    def totals_(self):
        self._check_is_fitted()
        return self._totals

    @property
    def multiplicities_(self):
        self._check_is_fitted()
        return [(p, r) for p, r in self._points]

    def _summary(self):
        return {
            "E": self._totals.E,
            "Q_plus_holo": self._totals.Q_plus_holo,
            "Q_plus_anti": self._totals.Q_plus_anti,
            "mirrored": self._mirrored,
            "bound": self._bound,
            "slack": self._slack,
            "genus": self._genus,
            "multiplicities": [
                {"chart": p.chart, "coord": p.coord, "multiplicity": r} for p, r in self._points
            ],
            "grid": self._spec.describe(),
        }


def theorem1_check(m, domain, target, spec=None, genus=0, tolerance=1e-5):
    """Run :class:`Theorem1Check` and return its report."""
    return Theorem1Check(spec, genus, tolerance).fit(m, domain, target).to_dict()


class EnergyBoundsCheck(_BaseCheck):
    """Energy lower bounds of non-constant maps.

    Always ``E >= sqrt(2) pi / max |Omega|``; for holomorphic or
    antiholomorphic maps also ``E >= 4 pi / H`` with ``H`` the maximal
    holomorphic sectional curvature (``4 pi / c`` on CP^n).
    """

    def __init__(self, spec=None, tolerance=1e-6):
        super().__init__(tolerance)
        self._spec = QuadratureSpec() if spec is None else spec

    def fit(self, m, domain, target):
        density = density_function(m, domain, target, ("e",))
        self._E = float(integrate(density, domain, self._spec)[0])
        omega = target.max_curvature_operator_norm()
        self._bounds = {}
        self._bounds["curvature_operator"] = np.sqrt(2.0) * np.pi / omega if omega > 0 else None
        if m.kind in (HOLOMORPHIC, ANTIHOLOMORPHIC):
            H = target.max_holomorphic_curvature()
            if H > 0:
                self._bounds["holomorphic_sectional"] = 4.0 * np.pi / H
            else:
                self._flag("non-positive holomorphic sectional curvature: no holomorphic sphere bound", warn=False)
        allowed = self._tolerance * max(self._E, 1.0)
        self._slacks = {k: (self._E - b if b is not None else None) for k, b in self._bounds.items()}
        self._passed = all(s is None or s >= -allowed for s in self._slacks.values())
        logger.info("energy bounds: E=%.8g bounds=%s", self._E, self._bounds)
        return self

    @property
    def energy_(self):
        self._check_is_fitted()
        return self._E

    @property
    def bounds_(self):
        self._check_is_fitted()
        return dict(self._bounds)

    @property
    def slacks_(self):
        self._check_is_fitted()
        return dict(self._slacks)

    def _summary(self):
        return {"E": self._E, "bounds": self._bounds, "slacks": self._slacks, "grid": self._spec.describe()}


def energy_bounds_check(m, domain, target, spec=None):
    return EnergyBoundsCheck(spec).fit(m, domain, target).to_dict()


class ConformalInvarianceCheck(_BaseCheck):
    """Drift of ``Q_+`` and ``E`` under a conformal change of the domain metric.

    Parameters
    ----------
    phi : callable
        Conformal exponent of the north chart coordinate.
    spec : QuadratureSpec, optional
    tolerance : float, optional (default=1e-4)
        Largest relative drift accepted.
    """

    def __init__(self, phi, spec=None, tolerance=1e-4):
        super().__init__(tolerance)
        if not callable(phi):
            raise TypeError("phi must be callable.")
        self._phi = phi
        self._spec = QuadratureSpec() if spec is None else spec

    def fit(self, m, domain, target):
        before = totals(m, domain, target, self._spec)
        after = totals(m, ConformalDomain(domain, self._phi), target, self._spec)

        def drift(a, b):
            return abs(b - a) / abs(a) if a != 0 else abs(b)

        self._before, self._after = before, after
        self._drift_Q = drift(before.Q_plus, after.Q_plus)
        self._drift_E = drift(before.E, after.E)
        self._passed = self._drift_Q <= self._tolerance and self._drift_E <= self._tolerance
        return self

    @property
    def drift_(self):
        self._check_is_fitted()
        return self._drift_Q

    @property
    def energy_drift_(self):
        self._check_is_fitted()
        return self._drift_E

    def _summary(self):
        return {
            "drift_Q_plus": self._drift_Q,
            "drift_E": self._drift_E,
            "before": self._before.to_dict(),
            "after": self._after.to_dict(),
        }


def conformal_invariance_check(m, domain, target, phi, spec=None):
    """Relative drift of ``Q_+`` when ``g`` is replaced by ``exp(2 phi) g``."""
    return ConformalInvarianceCheck(phi, spec).fit(m, domain, target).drift_


@dataclass
class SphericalMeasure:
    """Measure on the domain sphere: a density part and atoms.

    Parameters
    ----------
    domain : domain surface
    density : callable or None
        Density contract against the area form, scalar valued.
    atoms : list of (ChartPoint, float)
    spec : QuadratureSpec, optional
    """

    domain: object
    density: object = None
    atoms: tuple = ()
    spec: QuadratureSpec = None

    def __post_init__(self):
        self.atoms = tuple((p, float(mass)) for p, mass in self.atoms)
        if any(mass < 0 for _, mass in self.atoms):
            raise ValueError("atom masses must be non-negative.")
        if self.spec is None:
            self.spec = QuadratureSpec()

    def _scalar(self, f):
        def g(chart, z):
            return np.asarray(f(chart, z)).reshape(-1, np.size(z))[0]

        return g

    def total(self):
        """Total mass."""
        mass = sum(m for _, m in self.atoms)
        if self.density is not None:
            mass += float(integrate(self._scalar(self.density), self.domain, self.spec))
        if not np.isfinite(mass):
            raise FloatingPointError("measure has infinite total mass.")
        return mass

    def pair(self, test_function):
        """Integral of a continuous function against the measure."""
        mass = 0.0
        for p, m in self.atoms:
            mass += m * float(np.real(test_function(p.chart, np.asarray([p.coord]))[0]))
        if self.density is not None:
            density = self._scalar(self.density)

            def product(chart, z):
                return density(chart, z) * np.real(test_function(chart, z))

            mass += float(integrate(product, self.domain, self.spec))
        return mass


def atom_fit(masses, rtol=0.02, atol=1e-2):
    """Estimate an atom mass from masses measured along a family.

    Parameters
    ----------
    masses : list of (n, radius, mass)
        Disk masses along the index schedule.
    rtol : float, optional (default=0.02)
    atol : float, optional (default=1e-2)
        The sequence is stabilizing when its last change is at most
        ``rtol * |last| + atol``.

    Returns
    -------
    mass : float or None
        Last mass of a stabilizing sequence; None otherwise, including a
        single index where stabilization cannot be observed.
    diagnostics : dict
        ``stabilized``, ``monotone``, ``last_change``, ``trend`` (slope of
        mass against ``log n``) and ``flags``.
    """
    rows = sorted((int(n), float(r), float(m)) for n, r, m in masses)
    if len(rows) == 0:
        raise ValueError("masses must not be empty.")
    n = np.array([r[0] for r in rows], dtype=float)
    values = np.array([r[2] for r in rows])
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite disk mass in the sequence.")
    flags = []
    if len(rows) == 1:
        last_change = np.nan
        trend = np.nan
        flags.append("single index: stabilization not observable")
    else:
        last_change = float(abs(values[-1] - values[-2]))
        reg = LinearRegression().fit(np.log(n)[:, None], values)
        trend = float(reg.coef_[0])
    diffs = np.diff(values)
    monotone = bool(np.all(diffs >= -atol) or np.all(diffs <= atol))
    stabilized = len(rows) > 1 and last_change <= rtol * abs(values[-1]) + atol
    if len(rows) > 1 and not stabilized:
        flags.append(f"non-stabilizing sequence (last change {last_change:.3e})")
    diagnostics = {
        "stabilized": bool(stabilized),
        "monotone": monotone,
        "last_change": last_change,
        "trend": trend,
        "flags": flags,
    }
    return (float(values[-1]) if stabilized else None), diagnostics


def disk_mass_table(masses):
    """Per-radius disk masses as a DataFrame, ready for ``to_csv``."""
    return pd.DataFrame([(int(n), float(r), float(m)) for n, r, m in masses], columns=["n", "radius", "mass"])
