"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from sklearn.utils import check_scalar

__all__ = [
    "NORTH",
    "SOUTH",
    "CHARTS",
    "ChartPoint",
    "transition",
    "to_chart",
    "to_homogeneous",
    "affine_coordinates",
    "RoundSphere",
    "ConformalDomain",
    "EuclideanDomain",
    "CurveTarget",
    "RoundTarget",
    "FlatTarget",
    "PerturbedRoundTarget",
    "FubiniStudyTarget",
    "curvature_tensor",
    "curvature_operator_norm",
    "smooth_cutoff",
    "truncated_linear_phi",
    "chart_lattice",
    "euclidean_laplacian",
    "laplace_beltrami",
    "numerical_gauss_curvature",
]

logger = logging.getLogger(__name__)

NORTH = "north"
SOUTH = "south"
CHARTS = (NORTH, SOUTH)


def _other(chart):
    return SOUTH if chart == NORTH else NORTH


def _check_chart(chart):
    if chart not in CHARTS:
        raise ValueError(f"chart must be one of {CHARTS}, got {chart!r}.")
    return chart


@dataclass(frozen=True)
class ChartPoint:
    """A point of the domain sphere in one of the two stereographic charts.

    The north chart uses the coordinate ``z``, the south chart ``w = 1/z``.
    Each chart owns its closed unit disk.
    """

    chart: str
    coord: complex

    def __post_init__(self):
        _check_chart(self.chart)
        coord = complex(self.coord)
        if not np.isfinite(coord.real) or not np.isfinite(coord.imag):
            raise ValueError("coord must be finite; use the other chart for the point at infinity.")
        object.__setattr__(self, "coord", coord)

    @property
    def is_owned(self):
        """Whether the point lies in the closed unit disk of its chart."""
        return abs(self.coord) <= 1.0

    def canonical(self):
        """Return the same point expressed in the chart that owns it."""
        if self.is_owned:
            return self
        return transition(self)


def transition(p):
    """Express a chart point in the other chart.

    Parameters
    ----------
    p : ChartPoint
        Point with a non-zero coordinate.

    Returns
    -------
    q : ChartPoint
        The same geometric point, ``w = 1/z``.
    """
    if p.coord == 0:
        raise ValueError("point is the other chart's infinity")
    return ChartPoint(_other(p.chart), 1.0 / p.coord)


def to_chart(chart, z, target_chart):
    """Vectorized coordinate change between the domain charts."""
    z = np.asarray(z, dtype=complex)
    if chart == target_chart:
        return z
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / z


def to_homogeneous(u, chart):
    """Homogeneous coordinates of target points given in affine charts.

    Parameters
    ----------
    u : array-like, shape (n, ...)
        Affine coordinates.
    chart : int or array-like, shape (...)
        Position of the unit coordinate.

    Returns
    -------
    Z : ndarray, shape (n + 1, ...)
    """
    u = np.asarray(u, dtype=complex)
    chart = np.broadcast_to(np.asarray(chart), u.shape[1:])
    n = u.shape[0]
    rows = np.arange(n + 1).reshape((n + 1,) + (1,) * chart.ndim)
    src = np.clip(rows - (rows > chart[None, ...]), 0, n - 1)
    Z = np.take_along_axis(u, np.broadcast_to(src, (n + 1,) + chart.shape), axis=0)
    Z[np.broadcast_to(rows == chart[None, ...], Z.shape)] = 1.0
    return Z


def affine_coordinates(Z, chart=None):
    """Affine coordinates of homogeneous points.

    Parameters
    ----------
    Z : array-like, shape (n + 1, ...)
        Homogeneous coordinates.
    chart : int or array-like, optional (default=None)
        Affine chart to use. By default the chart of the largest component.

    Returns
    -------
    u : ndarray, shape (n, ...)
        Affine coordinates.
    chart : ndarray of int, shape (...)
        Only returned when ``chart`` is None.
    """
    Z = np.asarray(Z, dtype=complex)
    n = Z.shape[0] - 1
    pick = chart is None
    if pick:
        chart = np.argmax(np.abs(Z), axis=0)
    chart = np.broadcast_to(np.asarray(chart), Z.shape[1:])
    Zk = np.take_along_axis(Z, chart[None, ...], axis=0)
    if np.any(np.abs(Zk) <= 1e-14 * np.max(np.abs(Z), axis=0)):
        raise FloatingPointError("point does not lie in the requested target chart")
    rows = np.arange(n).reshape((n,) + (1,) * chart.ndim)
    idx = np.broadcast_to(rows + (rows >= chart[None, ...]), (n,) + chart.shape)
    u = np.take_along_axis(Z, idx, axis=0) / Zk
    return (u, np.asarray(chart)) if pick else u


# ---------------------------------------------------------------------------
# Domain surfaces


class _BaseDomain(metaclass=ABCMeta):
    """Base class for conformal metrics ``g |dz|^2`` on the domain."""

    genus = 0

    @abstractmethod
    def conformal_factor(self, chart, z):
        """Return g at chart coordinates ``z``."""

    @abstractmethod
    def log_factor_derivative(self, chart, z):
        """Return the holomorphic derivative of log g."""

    @abstractmethod
    def gauss_curvature(self, chart, z):
        """Return K_Sigma at chart coordinates ``z``."""

    def describe(self):
        return {"type": type(self).__name__, "genus": self.genus}


class RoundSphere(_BaseDomain):
    """Round sphere of constant Gauss curvature, ``g = 4 / (K (1 + |z|^2)^2)``.

    The formula is the same in both charts.
    """

    def __init__(self, curvature=1.0):
        self._curvature = check_scalar(curvature, "curvature", (float, int), min_val=0.0, include_boundaries="neither")

    @property
    def curvature(self):
        return self._curvature

    def conformal_factor(self, chart, z):
        z = np.asarray(z, dtype=complex)
        return 4.0 / (self._curvature * (1.0 + np.abs(z) ** 2) ** 2)

    def log_factor_derivative(self, chart, z):
        z = np.asarray(z, dtype=complex)
        return -2.0 * np.conj(z) / (1.0 + np.abs(z) ** 2)

    def gauss_curvature(self, chart, z):
        return np.full(np.shape(z), float(self._curvature))

    def describe(self):
        return {"type": "round", "curvature": self._curvature, "genus": 0}


class EuclideanDomain(_BaseDomain):
    """Flat metric ``g = 1``, used on disks of the plane."""

    def conformal_factor(self, chart, z):
        return np.ones(np.shape(z))

    def log_factor_derivative(self, chart, z):
        return np.zeros(np.shape(z), dtype=complex)

    def gauss_curvature(self, chart, z):
        return np.zeros(np.shape(z))

    def describe(self):
        return {"type": "euclidean"}


class ConformalDomain(_BaseDomain):
    """Conformal rescaling ``exp(2 phi) g`` of another domain metric.

    Parameters
    ----------
    base : domain
        Metric to rescale.
    phi : callable
        Vectorized function of the north chart coordinate.
    phi_south : callable, optional (default=None)
        Function of the south chart coordinate. By default ``phi(1/w)``.
    step : float, optional (default=1e-4)
        Step of the central differences used for the derivatives of phi.
    """

    def __init__(self, base, phi, phi_south=None, step=1e-4):
        if not isinstance(base, _BaseDomain):
            raise TypeError("base must be a domain surface.")
        if not callable(phi):
            raise TypeError("phi must be callable.")
        self._base = base
        self._phi = {NORTH: phi}
        if phi_south is None:
            def phi_south(w):
                with np.errstate(divide="ignore", invalid="ignore"):
                    return phi(1.0 / np.asarray(w, dtype=complex))
        self._phi[SOUTH] = phi_south
        self._step = check_scalar(step, "step", float, min_val=0.0, include_boundaries="neither")
        self.genus = base.genus

    def phi(self, chart, z):
        return np.real(self._phi[chart](np.asarray(z, dtype=complex)))

    def conformal_factor(self, chart, z):
        return np.exp(2.0 * self.phi(chart, z)) * self._base.conformal_factor(chart, z)

    def log_factor_derivative(self, chart, z):
        z = np.asarray(z, dtype=complex)
        d = self._step
        phi_x = (self.phi(chart, z + d) - self.phi(chart, z - d)) / (2 * d)
        phi_y = (self.phi(chart, z + 1j * d) - self.phi(chart, z - 1j * d)) / (2 * d)
        return (phi_x - 1j * phi_y) + self._base.log_factor_derivative(chart, z)

    def gauss_curvature(self, chart, z):
        z = np.asarray(z, dtype=complex)
        d = self._step
        lap = (
            self.phi(chart, z + d) + self.phi(chart, z - d)
            + self.phi(chart, z + 1j * d) + self.phi(chart, z - 1j * d)
            - 4 * self.phi(chart, z)
        ) / d**2
        g0 = self._base.conformal_factor(chart, z)
        k0 = self._base.gauss_curvature(chart, z)
        return np.exp(-2.0 * self.phi(chart, z)) * (k0 - lap / g0)

    def describe(self):
        return {"type": "conformal", "base": self._base.describe(), "genus": self.genus}


def smooth_cutoff(t, inner, outer):
    """C-infinity cutoff equal to 1 for ``t <= inner`` and 0 for ``t >= outer``."""
    t = np.asarray(t, dtype=float)

    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a = psi((outer - t) / (outer - inner))
    b = psi((t - inner) / (outer - inner))
    return a / (a + b)


def truncated_linear_phi(amplitude=0.3, inner=0.5, outer=0.9):
    """Return ``phi(z) = amplitude * re(z)`` cut off smoothly before the seam."""

    def phi(z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(invalid="ignore", over="ignore"):
            cut = smooth_cutoff(np.abs(z), inner, outer)
            return np.where(cut > 0, amplitude * np.real(z) * cut, 0.0)

    return phi


# ---------------------------------------------------------------------------
# Kahler targets


class _BaseKahlerTarget(metaclass=ABCMeta):
    """Base class for Kahler targets given in affine charts.

    Target points are arrays ``u`` of shape ``(dim, ...)`` together with an
    integer chart index of shape ``(...)``. Chart ``k`` is the affine chart
    where the homogeneous coordinate ``Z_k`` equals one.
    """

    dim = 1
    n_charts = 2
    distance_is_exact = True

    @abstractmethod
    def metric(self, u, chart):
        """Return h_{a b-bar}(u), shape ``(dim, dim, ...)``."""

    @abstractmethod
    def christoffel(self, u, chart):
        """Return Theta^l_{a c}(u), shape ``(dim, dim, dim, ...)``."""

    @abstractmethod
    def curvature_tensor(self, u, chart):
        """Return K_{a b-bar c d-bar}(u), shape ``(dim, dim, dim, dim, ...)``."""

    @abstractmethod
    def distance(self, Z, W):
        """Geodesic distance between points given in homogeneous coordinates."""

    @abstractmethod
    def injectivity_radius(self):
        """Lower bound for the injectivity radius."""

    def describe(self):
        return {"type": type(self).__name__, "dim": self.dim}

    def curvature_operator_norm(self, u, chart):
        """Operator norm of the curvature operator on (1,1)-forms.

        The tensor is written in an h-orthonormal frame and reshaped into a
        ``dim**2`` square matrix, whose largest singular value is returned.
        """
        h = np.moveaxis(self.metric(u, chart), (0, 1), (-2, -1))
        K = np.moveaxis(self.curvature_tensor(u, chart), (0, 1, 2, 3), (-4, -3, -2, -1))
        L = np.linalg.cholesky(h)
        F = np.swapaxes(np.linalg.inv(L), -1, -2)
        Kf = np.einsum("...abcd,...ai,...bj,...ck,...dl->...ijkl", K, F, F.conj(), F, F.conj())
        n = self.dim
        M = Kf.reshape(Kf.shape[:-4] + (n * n, n * n))
        return np.linalg.norm(M, ord=2, axis=(-2, -1))

    def holomorphic_sectional_curvature(self, u, chart, X):
        """Holomorphic sectional curvature ``-2 K(X, X, X, X) / |X|^4``."""
        h = self.metric(u, chart)
        K = self.curvature_tensor(u, chart)
        Xc = np.conj(X)
        num = np.einsum("abcd...,a...,b...,c...,d...->...", K, X, Xc, X, Xc)
        norm2 = np.real(np.einsum("ab...,a...,b...->...", h, X, Xc))
        with np.errstate(divide="ignore", invalid="ignore"):
            return -2.0 * np.real(num) / norm2**2

    def max_curvature_operator_norm(self):
        """Maximum of the curvature operator norm over the target."""
        u, chart = self._sample_points()
        return float(np.max(self.curvature_operator_norm(u, chart)))

    @abstractmethod
    def max_holomorphic_curvature(self):
        """Maximum holomorphic sectional curvature over the target."""

    def _sample_points(self, n_radial=64, n_angular=128):
        r = (np.arange(n_radial) + 0.5) / n_radial
        theta = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
        z = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
        charts = range(self.n_charts)
        u = np.concatenate([z for _ in charts])[None, :]
        chart = np.concatenate([np.full(z.shape, k) for k in charts])
        return u, chart

    def to_homogeneous(self, u, chart):
        return to_homogeneous(u, chart)

    def from_homogeneous(self, Z):
        return affine_coordinates(Z)

    def in_chart(self, Z, chart):
        return affine_coordinates(Z, chart)

    def exponential_map(self, u0, chart, v, steps=64):
        """Integrate the geodesic equation from ``u0`` with initial velocity ``v``.

        Fixed-step 4th-order Runge-Kutta on ``u'' = -Theta(u', u')`` in the
        chart of the base point.

        Parameters
        ----------
        u0 : array-like, shape (dim,)
            Base point in affine coordinates.
        chart : int
            Chart index of the base point.
        v : array-like, shape (dim, n_points)
            Initial velocities in chart coordinates.
        steps : int, optional (default=64)
            Number of Runge-Kutta steps on ``[0, 1]``.

        Returns
        -------
        u : ndarray, shape (dim, n_points)
            End points of the geodesics.
        """
        v = np.asarray(v, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        x = np.broadcast_to(np.asarray(u0, dtype=complex)[:, None], v.shape).copy()
        ch = np.full(v.shape[1:], chart)

        def acc(x, y):
            theta = self.christoffel(x, ch)
            return -np.einsum("lac...,a...,c...->l...", theta, y, y)

        dt = 1.0 / steps
        y = v.copy()
        for _ in range(steps):
            k1x, k1y = y, acc(x, y)
            k2x, k2y = y + 0.5 * dt * k1y, acc(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
            k3x, k3y = y + 0.5 * dt * k2y, acc(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
            k4x, k4y = y + dt * k3y, acc(x + dt * k3x, y + dt * k3y)
            x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        return x

    def log_map(self, u0, chart, q, steps=64, tol=1e-10):
        """Initial velocities of the geodesics from ``u0`` to the points ``q``.

        Shooting on the exponential map, solved with ``scipy.optimize.root``.

        Parameters
        ----------
        u0 : array-like, shape (dim,)
            Base point.
        chart : int
            Chart index of ``u0``; ``q`` must be given in the same chart.
        q : array-like, shape (dim, n_points)
            End points in affine coordinates of ``chart``.

        Returns
        -------
        v : ndarray, shape (dim, n_points)
            Velocities with ``exp(v) = q``.
        """
        q = np.asarray(q, dtype=complex)
        if q.ndim == 1:
            q = q[:, None]
        u0 = np.asarray(u0, dtype=complex)
        n, m = q.shape

        def pack(v):
            return np.concatenate([v.real.ravel(), v.imag.ravel()])

        def unpack(x):
            return (x[: n * m] + 1j * x[n * m:]).reshape(n, m)

        def fun(x):
            return pack(self.exponential_map(u0, chart, unpack(x), steps) - q)

        def jac(x):
            # exp acts pointwise, so the Jacobian is block diagonal
            d = 1e-7
            base = self.exponential_map(u0, chart, unpack(x), steps)
            J = np.zeros((2 * n * m, 2 * n * m))
            for k in range(2 * n):
                e = np.zeros((n, m), dtype=complex)
                e[k % n] = 1.0 if k < n else 1j
                col = (self.exponential_map(u0, chart, unpack(x) + d * e, steps) - base) / d
                dre, dim = col.real, col.imag
                for a in range(n):
                    rows_re = a * m + np.arange(m)
                    rows_im = n * m + a * m + np.arange(m)
                    cols = (k % n) * m + np.arange(m) + (n * m if k >= n else 0)
                    J[rows_re, cols] = dre[a]
                    J[rows_im, cols] = dim[a]
            return J

        sol = optimize.root(fun, pack(q - u0[:, None]), jac=jac, method="hybr", tol=tol)
        residual = np.max(np.abs(fun(sol.x))) if sol.x.size else 0.0
        if residual > 1e3 * tol * max(1.0, np.max(np.abs(q))):
            raise FloatingPointError(f"geodesic shooting did not converge (residual {residual:.3e})")
        return unpack(sol.x)


class CurveTarget(_BaseKahlerTarget):
    """Complex curve with conformal metric ``h(u) |du|^2``.

    Parameters
    ----------
    conformal_factor : callable
        ``h(u, chart)``, positive.
    gauss_curvature : callable
        ``K_M(u, chart)``, given analytically.
    log_factor_derivative : callable
        ``d log h / du`` as a function of ``(u, chart)``.
    n_charts : int, optional (default=2)
        2 for a sphere (chart 1 is ``1/u``), 1 for the plane.
    """

    dim = 1

    def __init__(self, conformal_factor, gauss_curvature, log_factor_derivative, n_charts=2):
        for name, f in [
            ("conformal_factor", conformal_factor),
            ("gauss_curvature", gauss_curvature),
            ("log_factor_derivative", log_factor_derivative),
        ]:
            if not callable(f):
                raise TypeError(f"{name} must be callable.")
        self._h = conformal_factor
        self._k = gauss_curvature
        self._dlogh = log_factor_derivative
        self.n_charts = n_charts

    def conformal_factor(self, u, chart):
        return np.real(self._h(np.asarray(u, dtype=complex), np.asarray(chart)))

    def gauss_curvature(self, u, chart):
        return np.real(self._k(np.asarray(u, dtype=complex), np.asarray(chart)))

    def metric(self, u, chart):
        u = np.asarray(u, dtype=complex)
        return self.conformal_factor(u[0], chart)[None, None, ...].astype(complex)

    def christoffel(self, u, chart):
        u = np.asarray(u, dtype=complex)
        return np.asarray(self._dlogh(u[0], np.asarray(chart)), dtype=complex)[None, None, None, ...]

    def curvature_tensor(self, u, chart):
        u = np.asarray(u, dtype=complex)
        h = self.conformal_factor(u[0], chart)
        return (-0.5 * self.gauss_curvature(u[0], chart) * h**2)[None, None, None, None, ...].astype(complex)

    def curvature_operator_norm(self, u, chart):
        u = np.asarray(u, dtype=complex)
        return 0.5 * np.abs(self.gauss_curvature(u[0], chart))

    def max_holomorphic_curvature(self):
        u, chart = self._sample_points()
        return float(max(np.max(self.gauss_curvature(u[0], chart)), 0.0))

    def distance(self, Z, W):
        return _fubini_study_distance(Z, W, 1.0)

    def injectivity_radius(self):
        kmax = self.max_holomorphic_curvature()
        return np.pi / np.sqrt(kmax) if kmax > 0 else np.inf


class RoundTarget(CurveTarget):
    """Round sphere of Gauss curvature ``K``, ``h = 4 / (K (1 + |u|^2)^2)``."""

    def __init__(self, curvature=1.0):
        self._curvature = check_scalar(curvature, "curvature", (float, int), min_val=0.0, include_boundaries="neither")
        K = float(self._curvature)
        super().__init__(
            conformal_factor=lambda u, chart: 4.0 / (K * (1.0 + np.abs(u) ** 2) ** 2),
            gauss_curvature=lambda u, chart: np.full(np.shape(u), K),
            log_factor_derivative=lambda u, chart: -2.0 * np.conj(u) / (1.0 + np.abs(u) ** 2),
        )

    @property
    def curvature(self):
        return self._curvature

    def max_curvature_operator_norm(self):
        return 0.5 * self._curvature

    def max_holomorphic_curvature(self):
        return float(self._curvature)

    def distance(self, Z, W):
        return _fubini_study_distance(Z, W, self._curvature)

    def describe(self):
        return {"type": "round", "curvature": self._curvature, "dim": 1}


class FlatTarget(CurveTarget):
    """The complex plane with the Euclidean metric."""

    def __init__(self):
        super().__init__(
            conformal_factor=lambda u, chart: np.ones(np.shape(u)),
            gauss_curvature=lambda u, chart: np.zeros(np.shape(u)),
            log_factor_derivative=lambda u, chart: np.zeros(np.shape(u), dtype=complex),
            n_charts=1,
        )

    def max_curvature_operator_norm(self):
        return 0.0

    def max_holomorphic_curvature(self):
        return 0.0

    def distance(self, Z, W):
        Z = np.asarray(Z, dtype=complex)
        W = np.asarray(W, dtype=complex)
        return np.abs(Z[1] / Z[0] - W[1] / W[0])

    def describe(self):
        return {"type": "flat", "dim": 1}


class PerturbedRoundTarget(CurveTarget):
    """Round unit sphere rescaled by ``exp(2 psi)``, ``psi = a |u|^2 / (1 + |u|^2)``.

    In the south chart ``psi = a / (1 + |v|^2)``. The Gauss curvature is
    ``exp(-2 psi) (1 - a (1 - s) / (1 + s))`` with ``s = |u|^2``; it turns
    negative near ``u = 0`` once ``a > 1``.
    """

    def __init__(self, amplitude=0.3):
        self._amplitude = check_scalar(amplitude, "amplitude", (float, int))
        a = float(self._amplitude)

        def psi(u, chart):
            s = np.abs(u) ** 2
            return np.where(chart == 0, a * s / (1.0 + s), a / (1.0 + s))

        def h(u, chart):
            return np.exp(2 * psi(u, chart)) * 4.0 / (1.0 + np.abs(u) ** 2) ** 2

        def k(u, chart):
            s = np.abs(u) ** 2
            ratio = np.where(chart == 0, (1.0 - s) / (1.0 + s), (s - 1.0) / (s + 1.0))
            return np.exp(-2 * psi(u, chart)) * (1.0 - a * ratio)

        def dlogh(u, chart):
            s = np.abs(u) ** 2
            sign = np.where(chart == 0, 1.0, -1.0)
            return 2.0 * sign * a * np.conj(u) / (1.0 + s) ** 2 - 2.0 * np.conj(u) / (1.0 + s)

        super().__init__(h, k, dlogh)

    distance_is_exact = False

    def distance(self, Z, W, n_nodes=16):
        """Perturbed length of the round minimizing arc from ``Z`` to ``W``.

        An upper bound for the geodesic distance, exact along meridians
        (``psi`` is rotationally symmetric). Use ``geodesic_distance`` for
        the shooting value on a few pairs.
        """
        Z = np.asarray(Z, dtype=complex)
        W = np.asarray(W, dtype=complex)
        Z, W = np.broadcast_arrays(Z / np.linalg.norm(Z, axis=0), W / np.linalg.norm(W, axis=0))
        inner = np.sum(np.conj(Z) * W, axis=0)
        size = np.abs(inner)
        with np.errstate(divide="ignore", invalid="ignore"):
            W = W * np.where(size > 0, np.conj(inner) / size, 1.0)
        theta = np.arccos(np.clip(size, 0.0, 1.0))
        sin = np.sin(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            Y = np.where(sin > 1e-12, (W - np.cos(theta) * Z) / sin, 0.0)
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        s = 0.5 * (x + 1.0)
        angle = theta[..., None] * s
        Z1 = np.cos(angle) * Z[1][..., None] + np.sin(angle) * Y[1][..., None]
        psi = self._amplitude * np.abs(Z1) ** 2
        return 2.0 * theta * np.sum(0.5 * w * np.exp(psi), axis=-1)

    def geodesic_distance(self, Z, W, steps=64):
        """Geodesic distance by shooting, one pair of columns at a time.

        Parameters
        ----------
        Z, W : array-like, shape (2, n_pairs)
            Homogeneous coordinates; ``W`` must lie in the chart of ``Z``.

        Returns
        -------
        d : ndarray, shape (n_pairs,)
        """
        Z = np.asarray(Z, dtype=complex).reshape(2, -1)
        W = np.asarray(W, dtype=complex).reshape(2, -1)
        out = np.empty(Z.shape[1])
        for k in range(Z.shape[1]):
            chart = int(np.argmax(np.abs(Z[:, k])))
            u0 = affine_coordinates(Z[:, k], chart)
            q = affine_coordinates(W[:, k], chart)
            v = self.log_map(u0, chart, q[:, None], steps=steps)
            out[k] = float(np.sqrt(self.conformal_factor(u0[0], chart)) * np.abs(v[0, 0]))
        return out

    def describe(self):
        return {"type": "perturbed-round", "amplitude": self._amplitude, "dim": 1}


class FubiniStudyTarget(_BaseKahlerTarget):
    """Complex projective space with the Fubini-Study metric.

    In every affine chart
    ``h = (4/c) ((1 + |z|^2) I - conj(z) z^T) / (1 + |z|^2)^2``,
    scaled so that the holomorphic sectional curvature equals ``c``.

    Parameters
    ----------
    n : int
        Complex dimension.
    c : float, optional (default=1.0)
        Holomorphic sectional curvature.
    """

    def __init__(self, n, c=1.0):
        self.dim = int(check_scalar(n, "n", (int, np.integer), min_val=1))
        self._c = float(check_scalar(c, "c", (float, int), min_val=0.0, include_boundaries="neither"))
        self.n_charts = self.dim + 1

    @property
    def c(self):
        return self._c

    def _eye(self, ndim):
        n = self.dim
        return np.eye(n).reshape((n, n) + (1,) * ndim)

    def metric(self, u, chart):
        z = np.asarray(u, dtype=complex)
        s = np.sum(np.abs(z) ** 2, axis=0)
        eye = self._eye(s.ndim)
        outer = np.conj(z)[:, None, ...] * z[None, :, ...]
        return (4.0 / self._c) * (eye * (1.0 + s) - outer) / (1.0 + s) ** 2

    def christoffel(self, u, chart):
        z = np.asarray(u, dtype=complex)
        s = np.sum(np.abs(z) ** 2, axis=0)
        zb = np.conj(z) / (1.0 + s)
        eye = self._eye(s.ndim)
        return -(eye[:, :, None, ...] * zb[None, None, :, ...] + eye[:, None, :, ...] * zb[None, :, None, ...])

    def curvature_tensor(self, u, chart):
        h = self.metric(u, chart)
        return -(self._c / 4.0) * (
            np.einsum("ab...,cd...->abcd...", h, h) + np.einsum("ad...,cb...->abcd...", h, h)
        )

    def max_curvature_operator_norm(self):
        return self._c * (self.dim + 1) / 4.0

    def max_holomorphic_curvature(self):
        return self._c

    def distance(self, Z, W):
        return _fubini_study_distance(Z, W, self._c)

    def injectivity_radius(self):
        return np.pi / np.sqrt(self._c)

    def describe(self):
        return {"type": "fubini-study", "n": self.dim, "c": self._c}


def _fubini_study_distance(Z, W, c):
    Z = np.asarray(Z, dtype=complex)
    W = np.asarray(W, dtype=complex)
    inner = np.abs(np.sum(Z * np.conj(W), axis=0))
    norms = np.linalg.norm(Z, axis=0) * np.linalg.norm(W, axis=0)
    return 2.0 / np.sqrt(c) * np.arccos(np.clip(inner / norms, 0.0, 1.0))


def curvature_tensor(target, u, chart=0):
    """Curvature tensor ``K_{a b-bar c d-bar}`` of a Kahler target at ``u``.

    Parameters
    ----------
    target : Kahler target
        CurveTarget or FubiniStudyTarget.
    u : array-like, shape (dim,) or (dim, n_points)
        Target point(s) in affine coordinates.
    chart : int or array-like, optional (default=0)
        Affine chart of ``u``.

    Returns
    -------
    K : ndarray, shape (dim, dim, dim, dim, ...)
        For curve targets the single component ``-(1/2) K_M h^2``.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim == 0:
        u = u[None]
    if u.shape[0] != target.dim:
        raise ValueError(f"u must have leading dimension {target.dim}.")
    return target.curvature_tensor(u, np.broadcast_to(np.asarray(chart), u.shape[1:]))


def curvature_operator_norm(target, u, chart=0):
    """Norm ``|Omega|`` of the curvature operator at ``u``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim == 0:
        u = u[None]
    return target.curvature_operator_norm(u, np.broadcast_to(np.asarray(chart), u.shape[1:]))


# ---------------------------------------------------------------------------
# Lattices and finite differences


def chart_lattice(step, radius=1.0, margin=2):
    """Uniform square lattice ``x_i = i * step`` covering a chart disk.

    The lattice extends ``margin`` points beyond ``radius`` so that every
    point of the closed disk has a full 5-point stencil.

    Returns
    -------
    z : ndarray, shape (m, m)
        Complex lattice points, ``z[j, i] = x_i + 1j * x_j``.
    """
    step = check_scalar(step, "step", float, min_val=0.0, include_boundaries="neither")
    k = int(np.ceil(radius / step - 1e-12)) + margin
    x = step * np.arange(-k, k + 1)
    return x[None, :] + 1j * x[:, None]


def euclidean_laplacian(values, step, stride=1):
    """5-point Euclidean Laplacian; border rows and columns are NaN.

    ``stride`` uses neighbours ``stride`` points away, i.e. grid step
    ``stride * step``, on the same samples.
    """
    f = np.asarray(values)
    s = stride
    out = np.full(f.shape, np.nan, dtype=np.result_type(f, float))
    out[s:-s, s:-s] = (
        f[2 * s:, s:-s] + f[:-2 * s, s:-s] + f[s:-s, 2 * s:] + f[s:-s, :-2 * s] - 4 * f[s:-s, s:-s]
    ) / (s * step) ** 2
    return out


def laplace_beltrami(values, step, conformal_factor, stride=1):
    """Non-negative Laplacian ``-(1/g) * (Euclidean Laplacian)``."""
    return -euclidean_laplacian(values, step, stride) / conformal_factor


def numerical_gauss_curvature(domain, chart=NORTH, step=1.0 / 32, radius=1.0):
    """Gauss curvature ``(1/2) Delta log g`` of a domain metric on a lattice.

    Returns
    -------
    z : ndarray
        Lattice points inside the closed disk of ``radius``.
    curvature : ndarray
        Finite difference curvature at these points.
    """
    z = chart_lattice(step, radius)
    g = domain.conformal_factor(chart, z)
    K = 0.5 * laplace_beltrami(np.log(g), step, g)
    inside = (np.abs(z) <= radius) & np.isfinite(K)
    return z[inside], K[inside]
