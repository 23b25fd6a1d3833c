"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import roots_jacobi
from sklearn.utils import check_random_state, check_scalar

from .base import _BaseCheck
from .geometry import chart_lattice, euclidean_laplacian, smooth_cutoff

__all__ = [
    "DiskMeasure",
    "PotentialReport",
    "log_potential",
    "P1Check",
    "p1_check",
    "P2Check",
    "p2_check",
    "KeyLemmaCheck",
    "key_lemma_check",
    "random_disk_measure",
]

logger = logging.getLogger(__name__)

# mean of log|x| over the square [-1, 1]^2
_SELF_CELL = 0.5 * (np.log(2.0) - 3.0 + 0.5 * np.pi)

_CHUNK = 4096


class DiskMeasure:
    """Finite measure on the closed unit disk: atoms plus a lattice density.

    Parameters
    ----------
    atoms : list of (complex, float), optional
        Positions and masses.
    density : array-like, optional
        Non-negative samples on ``chart_lattice(step, 1.0, margin=0)``; only
        points with ``|z| <= 1`` carry mass, each with cell area ``step**2``.
    step : float, optional
        Lattice step; required with ``density``.
    """

    def __init__(self, atoms=(), density=None, step=None):
        self.atoms = []
        for zeta, mass in atoms:
            zeta, mass = complex(zeta), float(mass)
            if mass < 0:
                raise ValueError("atom masses must be non-negative.")
            if abs(zeta) > 1.0:
                raise ValueError(f"atom at {zeta} lies outside the closed unit disk.")
            self.atoms.append((zeta, mass))
        self.step = None
        self._points = np.zeros(0, dtype=complex)
        self._masses = np.zeros(0)
        if density is not None:
            if step is None:
                raise ValueError("step is required with a density.")
            self.step = check_scalar(step, "step", float, min_val=0.0, include_boundaries="neither")
            z = chart_lattice(self.step, 1.0, margin=0)
            density = np.asarray(density, dtype=float)
            if density.shape != z.shape:
                raise ValueError(f"density must have shape {z.shape}.")
            if np.any(density < 0) or not np.all(np.isfinite(density)):
                raise ValueError("density samples must be finite and non-negative.")
            inside = np.abs(z) <= 1.0
            keep = inside & (density > 0)
            self._points = z[keep]
            self._masses = density[keep] * self.step**2

    @classmethod
    def from_density(cls, function, step, atoms=()):
        """Sample a non-negative density function on the lattice."""
        z = chart_lattice(step, 1.0, margin=0)
        return cls(atoms, np.where(np.abs(z) <= 1.0, function(z), 0.0), step)

    def mass(self):
        """Total mass ``mu(D)``."""
        return float(sum(m for _, m in self.atoms) + np.sum(self._masses))

    def scaled(self, factor):
        """The measure multiplied by a non-negative factor."""
        out = DiskMeasure([(z, factor * m) for z, m in self.atoms])
        out.step = self.step
        out._points = self._points.copy()
        out._masses = factor * self._masses
        return out

    def __add__(self, other):
        if self.step is not None and other.step is not None and self.step != other.step:
            raise ValueError("cannot add lattice densities with different steps.")
        out = DiskMeasure(self.atoms + other.atoms)
        out.step = self.step if self.step is not None else other.step
        out._points = np.concatenate([self._points, other._points])
        out._masses = np.concatenate([self._masses, other._masses])
        return out

    def describe(self):
        return {
            "atoms": [[z, m] for z, m in self.atoms],
            "density_mass": float(np.sum(self._masses)),
            "step": self.step,
            "mass": self.mass(),
        }


@dataclass
class PotentialReport:
    """Both sides of every inequality checked on a disk measure or grid."""

    kappa: float
    p: float
    inequalities: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)

    def add(self, name, lhs, rhs, slack=0.0):
        holds = bool(lhs <= rhs * (1.0 + slack))
        self.inequalities.append({"name": name, "lhs": float(lhs), "rhs": float(rhs), "holds": holds})
        return holds

    @property
    def holds(self):
        return all(item["holds"] for item in self.inequalities)

    def to_dict(self):
        return {"kappa": self.kappa, "p": self.p, "inequalities": list(self.inequalities), "norms": dict(self.norms)}


def log_potential(mu, z):
    """Logarithmic potential ``v(z) = -(1/2 pi) int log|z - zeta| dmu(zeta)``.

    Atoms are summed in closed form. Lattice cells are treated as point
    masses, except that a cell within half a step of ``z`` uses the mean of
    ``log`` over the cell.

    Parameters
    ----------
    mu : DiskMeasure
    z : complex or array-like of complex

    Returns
    -------
    v : float or ndarray
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    v = np.zeros(flat.shape)
    for zeta, mass in mu.atoms:
        if mass == 0:
            continue
        d = np.abs(flat - zeta)
        if np.any(d == 0):
            raise ValueError("potential is +inf at an atom")
        v -= mass * np.log(d) / (2 * np.pi)
    if mu._masses.size:
        h = mu.step
        near = np.log(0.5 * h) + _SELF_CELL
        for start in range(0, flat.size, _CHUNK):
            zc = flat[start:start + _CHUNK]
            d = np.abs(zc[:, None] - mu._points[None, :])
            with np.errstate(divide="ignore"):
                logs = np.where(d < 0.5 * h, near, np.log(d))
            v[start:start + _CHUNK] -= logs @ mu._masses / (2 * np.pi)
    return v.reshape(z.shape) if z.ndim else float(v[0])


def _polar_nodes(n_radial=128, n_angular=256, radius=1.0):
    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * radius * (x + 1.0)
    wr = 0.5 * radius * w * r
    theta = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    z = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    return z, (wr[:, None] * np.full(n_angular, 2 * np.pi / n_angular)[None, :]).ravel()


class P1Check(_BaseCheck):
    """Exponential integrability of a logarithmic potential.

    ``||e^v||_{L^p(D)} <= ((2 pi / (d + 2)) 2^(d + 2))^(1/p)`` with
    ``d = -p mu(D) / 2 pi``, for ``0 < mu(D) < 4 pi / p``.

    The integral of ``e^(pv)`` is split by a smooth partition of unity: near
    each atom Gauss-Jacobi radial nodes absorb the power ``|z - zeta|^d_a``,
    the rest uses a Gauss-Legendre polar grid.

    Parameters
    ----------
    p : float
        Exponent, ``p >= 1``.
    n_radial : int, optional (default=128)
    n_angular : int, optional (default=256)
    n_jacobi : int, optional (default=48)
    tolerance : float, optional (default=1e-3)
        Relative slack of the inequality.
    """

    def __init__(self, p, n_radial=128, n_angular=256, n_jacobi=48, tolerance=1e-3):
        super().__init__(tolerance)
        self._p = float(check_scalar(p, "p", (float, int), min_val=1.0))
        self._n_radial = n_radial
        self._n_angular = n_angular
        self._n_jacobi = n_jacobi

    def _local_radii(self, atoms):
        radii = []
        for i, (zeta, _) in enumerate(atoms):
            sep = [abs(zeta - other) for j, (other, _) in enumerate(atoms) if j != i]
            r = min(0.5 * (1.0 - abs(zeta)), 0.45 * min(sep, default=np.inf), 0.25)
            radii.append(r if 1.0 - abs(zeta) > 1e-3 and r > 0 else None)
        return radii

    def fit(self, mu):
        """Integrate ``e^(pv)`` over the unit disk and compare with the bound.

        Parameters
        ----------
        mu : DiskMeasure

        Returns
        -------
        self : object
        """
        p = self._p
        mass = mu.mass()
        if not 0 < mass < 4 * np.pi / p:
            raise ValueError(f"mass out of admissible range: mu(D) = {mass:.6g}, p = {p:g}")
        delta = -p * mass / (2 * np.pi)
        rhs = ((2 * np.pi / (delta + 2)) * 2.0 ** (delta + 2)) ** (1.0 / p)

        atoms = [(z, m) for z, m in mu.atoms if m > 0]
        radii = self._local_radii(atoms)
        local = [(z, m, r) for (z, m), r in zip(atoms, radii) if r is not None]

        def bump(x, z0, r):
            return smooth_cutoff(np.abs(x - z0) / r, 0.5, 1.0)

        zg, wg = _polar_nodes(self._n_radial, self._n_angular)
        keep = np.ones(zg.shape)
        for z0, _, r in local:
            keep -= bump(zg, z0, r)
        integral = np.sum(np.exp(p * log_potential(mu, zg)) * keep * wg)

        theta = 2 * np.pi * (np.arange(self._n_angular) + 0.5) / self._n_angular
        for z0, m, r in local:
            d_atom = -p * m / (2 * np.pi)
            x, w = roots_jacobi(self._n_jacobi, 0.0, d_atom + 1.0)
            rr = 0.5 * r * (x + 1.0)
            zl = z0 + rr[:, None] * np.exp(1j * theta[None, :])
            F = np.exp(p * log_potential(mu, zl)) * rr[:, None] ** (-d_atom) * bump(zl, z0, r)
            integral += (0.5 * r) ** (d_atom + 2) * np.sum(w[:, None] * F) * (2 * np.pi / self._n_angular)

        self._lhs = float(integral ** (1.0 / p))
        self._rhs = float(rhs)
        self._mass = mass
        self._delta = delta
        self._passed = self._lhs <= self._rhs * (1.0 + self._tolerance)
        logger.debug("p1: mass=%.6g p=%g lhs=%.8g rhs=%.8g", mass, p, self._lhs, self._rhs)
        return self

    @property
    def report_(self):
        self._check_is_fitted()
        report = PotentialReport(kappa=self._mass, p=self._p, norms={"e_v_Lp": self._lhs})
        report.add("exponential_integrability", self._lhs, self._rhs, self._tolerance)
        return report

    def _summary(self):
        return self.report_.to_dict()


def p1_check(mu, p):
    """Run :class:`P1Check` and return its :class:`PotentialReport`."""
    return P1Check(p).fit(mu).report_


def _lattice_field(w, step, margin=1):
    z = chart_lattice(step, 1.0, margin=margin)
    if callable(w):
        return z, np.real(w(z))
    values = np.asarray(w, dtype=float)
    if values.shape != z.shape:
        raise ValueError(f"grid must have shape {z.shape} for step {step}.")
    return z, values


class P2Check(_BaseCheck):
    """Mean-value bound for subharmonic functions on the unit disk.

    ``e^(w(z)) <= (1 / (pi (1 - |z|^2)^2)) int_D e^w``.

    Parameters
    ----------
    step : float, optional (default=1/64)
        Lattice step used for the subharmonicity check (and for the
        integral when ``w`` is given on a grid).
    tolerance : float, optional (default=1e-3)
        Relative slack of the inequality.
    laplacian_tolerance : float, optional (default=1e-8)
        Allowed negative Euclidean Laplacian, relative to ``max|w| / step^2``.
    """

    def __init__(self, step=1.0 / 64, tolerance=1e-3, laplacian_tolerance=1e-8):
        super().__init__(tolerance)
        self._step = check_scalar(step, "step", float, min_val=0.0, include_boundaries="neither")
        self._laplacian_tolerance = laplacian_tolerance

    def fit(self, w, z):
        """Check the bound at ``z``.

        Parameters
        ----------
        w : callable or array-like
            Function of the complex coordinate, or samples on
            ``chart_lattice(step, 1.0, margin=1)``.
        z : complex
            Point with ``|z| < 1``.

        Returns
        -------
        self : object
        """
        z = complex(z)
        if not abs(z) < 1:
            raise ValueError("z must lie in the open unit disk.")
        h = self._step
        grid, values = _lattice_field(w, h)
        lap = euclidean_laplacian(values, h)
        inside = (np.abs(grid) < 1.0) & np.isfinite(lap)
        scale = max(float(np.max(np.abs(values[inside]))), 1e-300) / h**2
        worst = np.argmin(np.where(inside, lap, np.inf))
        if lap.flat[worst] < -self._laplacian_tolerance * scale:
            raise ValueError(
                f"w is not subharmonic: Laplacian {lap.flat[worst]:.3e} at z = {grid.flat[worst]:.4g}"
            )
        if callable(w):
            zg, wg = _polar_nodes()
            integral = float(np.sum(np.exp(np.real(w(zg))) * wg))
            lhs = float(np.exp(np.real(w(np.asarray([z])))[0]))
        else:
            cells = np.abs(grid) <= 1.0
            integral = float(np.sum(np.exp(values[cells])) * h**2)
            x = grid[0, :].real
            interp = RegularGridInterpolator((x, x), values)
            lhs = float(np.exp(interp([[z.imag, z.real]])[0]))
        self._lhs = lhs
        self._rhs = integral / (np.pi * (1.0 - abs(z) ** 2) ** 2)
        self._integral = integral
        self._passed = self._lhs <= self._rhs * (1.0 + self._tolerance)
        return self

    @property
    def report_(self):
        self._check_is_fitted()
        report = PotentialReport(kappa=0.0, p=1.0, norms={"e_w_L1": self._integral})
        report.add("schwarz_lemma", self._lhs, self._rhs, self._tolerance)
        return report

    def _summary(self):
        return self.report_.to_dict()


def p2_check(w, z, step=1.0 / 64):
    """Run :class:`P2Check` and return its :class:`PotentialReport`."""
    return P2Check(step).fit(w, z).report_


class KeyLemmaCheck(_BaseCheck):
    """Step-by-step check of the L^p bound for ``e^phi`` on the half disk.

    ``mu = (D phi)^+ dV`` with the non-negative Laplacian ``D = -Delta``,
    ``v`` its potential and ``w = phi - v``. The checked chain is:
    ``v >= -(kappa / 2 pi) log 2``; ``int e^w <= 2^(kappa/2pi) int e^phi``;
    ``sup_{D_1/2} e^w <= (16 / 9 pi) int e^w``; the exponential
    integrability of ``v``; and the composite
    ``||e^phi||_{L^p(D_1/2)} <= C(p, kappa) ||e^phi||_{L^1(D)}`` with
    ``C = 2^(kappa/2pi) (16 / 9 pi) C_2``.

    Parameters
    ----------
    p : float
        Exponent, ``1 <= p < 4 pi / kappa``.
    step : float, optional (default=1/64)
        Lattice step.
    tolerance : float, optional (default=1e-3)
        Relative slack of every inequality.
    """

    def __init__(self, p, step=1.0 / 64, tolerance=1e-3):
        super().__init__(tolerance)
        self._p = float(check_scalar(p, "p", (float, int), min_val=1.0))
        self._step = check_scalar(step, "step", float, min_val=0.0, include_boundaries="neither")

    def fit(self, phi):
        """Run the chain on ``phi``.

        Parameters
        ----------
        phi : callable or array-like
            Function of the complex coordinate, or samples on
            ``chart_lattice(step, 1.0, margin=1)``.

        Returns
        -------
        self : object
        """
        h, p = self._step, self._p
        z, values = _lattice_field(phi, h)
        laplacian = -euclidean_laplacian(values, h)
        inside = np.abs(z) <= 1.0
        density = np.where(inside, np.maximum(np.nan_to_num(laplacian), 0.0), 0.0)
        kappa = float(np.sum(density) * h**2)
        if kappa >= 4 * np.pi:
            raise ValueError(f"kappa out of admissible range: kappa = {kappa:.6g} >= 4 pi")
        if kappa > 0 and p >= 4 * np.pi / kappa:
            raise ValueError(f"p out of admissible range: p = {p:g} >= 4 pi / kappa = {4 * np.pi / kappa:.6g}")

        z0 = chart_lattice(h, 1.0, margin=0)
        trim = (z.shape[0] - z0.shape[0]) // 2
        mu = DiskMeasure(density=density[trim:-trim, trim:-trim], step=h) if kappa > 0 else DiskMeasure()

        v = log_potential(mu, z[inside]) if kappa > 0 else np.zeros(np.sum(inside))
        phi_in = values[inside]
        w = phi_in - v
        half = np.abs(z[inside]) <= 0.5
        cell = h**2
        tol = self._tolerance

        report = PotentialReport(kappa=kappa, p=p)
        report.add("potential_lower_bound", -float(np.min(v)), kappa / (2 * np.pi) * np.log(2.0), tol)
        int_w = float(np.sum(np.exp(w)) * cell)
        int_phi = float(np.sum(np.exp(phi_in)) * cell)
        report.add("jensen_step", int_w, 2.0 ** (kappa / (2 * np.pi)) * int_phi, tol)
        sup_w = float(np.max(np.exp(w[half])))
        report.add("schwarz_lemma_half_disk", sup_w, 16.0 / (9.0 * np.pi) * int_w, tol)

        if kappa > 0:
            p1 = P1Check(p).fit(mu).report_
            c2 = p1.inequalities[0]["rhs"]
            report.inequalities.append(dict(p1.inequalities[0]))
            report.norms["e_v_Lp"] = p1.norms["e_v_Lp"]
        else:
            c2 = (4 * np.pi) ** (1.0 / p)
            report.norms["e_v_Lp"] = np.pi ** (1.0 / p)
        C = 2.0 ** (kappa / (2 * np.pi)) * 16.0 / (9.0 * np.pi) * c2
        lp_half = float((np.sum(np.exp(p * phi_in[half])) * cell) ** (1.0 / p))
        report.add("composite", lp_half, C * int_phi, tol)
        report.norms.update({"e_phi_Lp_half": lp_half, "e_phi_L1": int_phi, "e_w_L1": int_w, "constant": C})

        self._report = report
        self._kappa = kappa
        self._passed = report.holds
        logger.info("key lemma: kappa=%.6g p=%g holds=%s", kappa, p, self._passed)
        return self

    @property
    def report_(self):
        self._check_is_fitted()
        return self._report

    @property
    def kappa_(self):
        self._check_is_fitted()
        return self._kappa

    def _summary(self):
        return self._report.to_dict()


def key_lemma_check(phi, p, step=1.0 / 64):
    """Run :class:`KeyLemmaCheck` and return its :class:`PotentialReport`."""
    return KeyLemmaCheck(p, step).fit(phi).report_


def random_disk_measure(n_atoms=5, total_mass=2.0, radius=0.9, random_state=None):
    """Atomic measure with random positions in ``D(0, radius)`` and a given mass."""
    check_scalar(n_atoms, "n_atoms", (int, np.integer), min_val=1)
    check_scalar(total_mass, "total_mass", (float, int), min_val=0.0)
    rng = check_random_state(random_state)
    r = radius * np.sqrt(rng.uniform(size=n_atoms))
    theta = rng.uniform(0, 2 * np.pi, size=n_atoms)
    weights = rng.uniform(0.1, 1.0, size=n_atoms)
    masses = total_mass * weights / np.sum(weights)
    return DiskMeasure(list(zip(r * np.exp(1j * theta), masses)))
