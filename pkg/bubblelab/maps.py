"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import comb, factorial
from sklearn.utils import check_scalar

from .geometry import CHARTS, NORTH, SOUTH, ChartPoint, _check_chart, to_homogeneous

__all__ = [
    "Jet",
    "ProjectiveCurve",
    "RationalMap",
    "ConjugateMap",
    "BipolynomialMap",
    "SmoothMapSpec",
    "MobiusPullback",
    "MapFamily",
    "jet",
    "ramification",
    "mobius_pullback",
    "veronese",
    "constant_map",
    "constant_family",
    "fixed_family",
    "shrinking_identity",
    "translated_identity",
    "two_bubble",
    "bubble_on_bubble",
    "FAMILIES",
    "DEFAULT_SCHEDULE",
]

logger = logging.getLogger(__name__)

HOLOMORPHIC = "holomorphic"
ANTIHOLOMORPHIC = "antiholomorphic"
GENERAL = "general"
KINDS = (HOLOMORPHIC, ANTIHOLOMORPHIC, GENERAL)

DEFAULT_SCHEDULE = (4, 8, 16, 32, 64)

_ROOT_NOISE = 64 * np.finfo(float).eps
_CLUSTER_SAFETY = 4.0


@dataclass
class Jet:
    """Map value and complex derivatives at an array of domain points.

    All vector fields have shape ``(n, ...)`` where ``n`` is the complex
    dimension of the target and ``...`` the shape of ``coord``.
    ``target_chart`` holds the affine chart index of ``u`` at every point.
    Second derivatives are None for first order jets.
    ``lead_z`` and ``lead_zb`` optionally hold unit directions of ``u_z`` and
    ``u_zb`` next to the points, used where a derivative vanishes to higher
    order.
    """

    u: np.ndarray
    u_z: np.ndarray
    u_zb: np.ndarray
    target_chart: np.ndarray
    chart: str
    coord: np.ndarray
    u_zz: np.ndarray = None
    u_zzb: np.ndarray = None
    u_zbzb: np.ndarray = None
    kind: str = field(default=GENERAL)
    lead_z: np.ndarray = None
    lead_zb: np.ndarray = None

    @property
    def dim(self):
        return self.u.shape[0]

    @property
    def order(self):
        return 1 if self.u_zz is None else 2

    def homogeneous(self):
        """Homogeneous target coordinates of ``u``."""
        return to_homogeneous(self.u, self.target_chart)


def _where(mask, a, b):
    if a is None or b is None:
        return None
    return np.where(mask, a, b)


def _merge_jets(mask, a, b, coord):
    """Pointwise choice between two jets of equal shape."""
    m = mask[None, ...]
    return Jet(
        u=np.where(m, a.u, b.u),
        u_z=np.where(m, a.u_z, b.u_z),
        u_zb=np.where(m, a.u_zb, b.u_zb),
        target_chart=np.where(mask, a.target_chart, b.target_chart),
        chart=a.chart,
        coord=coord,
        u_zz=_where(m, a.u_zz, b.u_zz),
        u_zzb=_where(m, a.u_zzb, b.u_zzb),
        u_zbzb=_where(m, a.u_zbzb, b.u_zbzb),
        kind=a.kind,
    )


def _reparametrize(j, d1, d2, chart, coord):
    """Holomorphic chain rule for ``u(z(t))`` with ``z' = d1`` and ``z'' = d2``."""
    out = Jet(
        u=j.u,
        u_z=j.u_z * d1,
        u_zb=j.u_zb * np.conj(d1),
        target_chart=j.target_chart,
        chart=chart,
        coord=coord,
        kind=j.kind,
    )
    if j.order == 2:
        out.u_zz = j.u_zz * d1**2 + j.u_z * d2
        out.u_zzb = j.u_zzb * np.abs(d1) ** 2
        out.u_zbzb = j.u_zbzb * np.conj(d1) ** 2 + j.u_zb * np.conj(d2)
    return out


def _check_order(order):
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2.")


class _BaseMap(metaclass=ABCMeta):
    """Base class for smooth maps from the domain sphere into a target."""

    kind = GENERAL
    dim = 1
    charts = CHARTS

    @abstractmethod
    def jets(self, chart, z, order=2):
        """Subclasses should implement this method!
        Evaluate jets at the points ``z`` of a domain chart.

        Parameters
        ----------
        chart : str
            Domain chart, ``"north"`` or ``"south"``.
        z : array-like of complex
            Chart coordinates.
        order : int, optional (default=2)
            1 or 2.

        Returns
        -------
        jet : Jet
        """

    def homogeneous(self, chart, z):
        """Homogeneous target coordinates at the points ``z``."""
        return self.jets(chart, z, order=1).homogeneous()

    def leading_directions(self, chart, z, delta=1e-6):
        """Unit directions of ``u_z`` and ``u_zb`` sampled at ``z + delta (1 + |z|)``.

        At an isolated zero of order ``r``, ``u_z = a (z - z_0)^r`` to leading
        order, so the sample spans the complex line of ``a``. Samples falling
        in another target chart, or vanishing, give NaN.
        """
        z = np.asarray(z, dtype=complex)
        j = self.jets(chart, z, order=1)
        near = self.jets(chart, z + delta * (1.0 + np.abs(z)), order=1)
        same = (near.target_chart == j.target_chart)[None, ...]
        out = []
        for v in (near.u_z, near.u_zb):
            norm = np.linalg.norm(v, axis=0)[None, ...]
            with np.errstate(divide="ignore", invalid="ignore"):
                out.append(np.where(same & (norm > 0), v / norm, np.nan))
        return out[0], out[1]

    def describe(self):
        return {"type": type(self).__name__, "kind": self.kind, "dim": self.dim}


class ProjectiveCurve(_BaseMap):
    """Holomorphic curve ``z -> [P_0(z) : ... : P_n(z)]`` in CP^n.

    Parameters
    ----------
    components : list of array-like
        ``n + 1`` coefficient lists, in increasing degree.

    Jets are exact: the target chart at each point is the one of the largest
    component and derivatives follow from the quotient rule. The south chart
    uses the polynomials ``w^D P_j(1/w)`` with ``D`` the largest degree.
    """

    kind = HOLOMORPHIC

    def __init__(self, components):
        if len(components) < 2:
            raise ValueError("components must contain at least two polynomials.")
        polys = [Polynomial(np.atleast_1d(np.asarray(c, dtype=complex))).trim() for c in components]
        if all(np.all(p.coef == 0) for p in polys):
            raise ValueError("components must not all vanish identically.")
        self.dim = len(polys) - 1
        self.degree = max(p.degree() for p in polys)
        south = []
        for p in polys:
            coef = np.zeros(self.degree + 1, dtype=complex)
            coef[: p.coef.size] = p.coef
            south.append(Polynomial(coef[::-1]))
        self._polys = {NORTH: polys, SOUTH: south}
        self._check_common_zero()

    @property
    def components(self):
        return [p.coef.copy() for p in self._polys[NORTH]]

    def _check_common_zero(self):
        candidates = [p for p in self._polys[NORTH] if p.degree() > 0 or p.coef[0] != 0]
        lowest = min(candidates, key=lambda p: p.degree())
        for r in lowest.roots():
            values = [abs(p(r)) for p in self._polys[NORTH]]
            scales = [np.sum(np.abs(p.coef) * abs(r) ** np.arange(p.coef.size)) for p in self._polys[NORTH]]
            if all(v <= 1e-8 * max(s, 1e-300) for v, s in zip(values, scales)):
                raise ValueError(f"components share the root z = {r:.6g}")

    def jets(self, chart, z, order=2):
        _check_chart(chart)
        _check_order(order)
        z = np.asarray(z, dtype=complex)
        polys = self._polys[chart]
        vals = [np.stack([p.deriv(k)(z) if k else p(z) for p in polys]) for k in range(order + 1)]
        k = np.argmax(np.abs(vals[0]), axis=0)
        n = self.dim
        rows = np.arange(n).reshape((n,) + (1,) * z.ndim)
        idx = np.broadcast_to(rows + (rows >= k[None, ...]), (n,) + z.shape)

        def pick(a):
            return np.take_along_axis(a, idx, axis=0), np.take_along_axis(a, k[None, ...], axis=0)

        f0, g0 = pick(vals[0])
        f1, g1 = pick(vals[1])
        r0 = 1.0 / g0
        r1 = -g1 / g0**2
        u = f0 * r0
        u_z = f1 * r0 + f0 * r1
        zeros = np.zeros_like(u)
        out = Jet(u=u, u_z=u_z, u_zb=zeros, target_chart=k, chart=chart, coord=z, kind=HOLOMORPHIC)
        if order == 2:
            f2, g2 = pick(vals[2])
            r2 = -g2 / g0**2 + 2 * g1**2 / g0**3
            out.u_zz = f2 * r0 + 2 * f1 * r1 + f0 * r2
            out.u_zzb = zeros.copy()
            out.u_zbzb = zeros.copy()
        return out

    def homogeneous(self, chart, z):
        z = np.asarray(z, dtype=complex)
        return np.stack([p(z) for p in self._polys[_check_chart(chart)]])

    def describe(self):
        return {"type": "projective-curve", "dim": self.dim, "degree": self.degree, "components": self.components}


class RationalMap(ProjectiveCurve):
    """Rational map ``numerator / denominator`` viewed as ``[den : num]``.

    Target chart 0 is the coordinate ``u``, chart 1 the coordinate ``1/u``.

    Parameters
    ----------
    numerator : array-like
        Coefficients in increasing degree.
    denominator : array-like
        Coefficients in increasing degree.
    """

    def __init__(self, numerator, denominator):
        try:
            super().__init__([denominator, numerator])
        except ValueError as e:
            raise ValueError(f"numerator and denominator are not coprime: {e}") from e

    @property
    def numerator(self):
        return self._polys[NORTH][1]

    @property
    def denominator(self):
        return self._polys[NORTH][0]

    def wronskian(self, chart=NORTH):
        """``P' Q - P Q'`` for numerator P and denominator Q in a chart."""
        Q, P = self._polys[_check_chart(chart)]
        return P.deriv() * Q - P * Q.deriv()

    def describe(self):
        return {
            "type": "rational",
            "degree": self.degree,
            "numerator": self.numerator.coef,
            "denominator": self.denominator.coef,
        }


class ConjugateMap(_BaseMap):
    """Antiholomorphic map ``z -> conj(f(z))`` for a holomorphic curve ``f``."""

    kind = ANTIHOLOMORPHIC

    def __init__(self, base):
        if not isinstance(base, _BaseMap) or base.kind != HOLOMORPHIC:
            raise TypeError("base must be a holomorphic map.")
        self.base = base
        self.dim = base.dim

    def jets(self, chart, z, order=2):
        j = self.base.jets(chart, z, order)
        out = Jet(
            u=np.conj(j.u),
            u_z=np.conj(j.u_zb),
            u_zb=np.conj(j.u_z),
            target_chart=j.target_chart,
            chart=j.chart,
            coord=j.coord,
            kind=ANTIHOLOMORPHIC,
        )
        if order == 2:
            out.u_zz = np.conj(j.u_zbzb)
            out.u_zzb = np.conj(j.u_zzb)
            out.u_zbzb = np.conj(j.u_zz)
        return out

    def homogeneous(self, chart, z):
        return np.conj(self.base.homogeneous(chart, z))

    def describe(self):
        return {"type": "conjugate", "base": self.base.describe()}


class BipolynomialMap(_BaseMap):
    """Smooth map ``u^a = sum c_ij z^i conj(z)^j`` into one affine chart.

    Only the north chart is available; the map is not required to extend
    to the whole sphere and serves pointwise density checks.

    Parameters
    ----------
    components : list of dict
        One dictionary ``{(i, j): c_ij}`` per target coordinate.
    target_chart : int, optional (default=0)
        Affine chart of the values.
    """

    kind = GENERAL
    charts = (NORTH,)

    def __init__(self, components, target_chart=0):
        if len(components) < 1:
            raise ValueError("components must not be empty.")
        self._terms = [{(int(i), int(j)): complex(c) for (i, j), c in comp.items()} for comp in components]
        for comp in self._terms:
            if any(i < 0 or j < 0 for i, j in comp):
                raise ValueError("exponents must be non-negative.")
        self.dim = len(self._terms)
        self._target_chart = int(target_chart)

    def jets(self, chart, z, order=2):
        _check_order(order)
        if chart != NORTH:
            raise ValueError("BipolynomialMap is only defined in the north chart.")
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)

        def term(c, i, j, di, dj):
            if i < di or j < dj:
                return 0.0
            coef = c * np.prod(np.arange(i - di + 1, i + 1)) * np.prod(np.arange(j - dj + 1, j + 1))
            return coef * z ** (i - di) * zb ** (j - dj)

        def evaluate(di, dj):
            return np.stack([
                sum((term(c, i, j, di, dj) for (i, j), c in comp.items()), np.zeros(z.shape, dtype=complex))
                for comp in self._terms
            ])

        out = Jet(
            u=evaluate(0, 0),
            u_z=evaluate(1, 0),
            u_zb=evaluate(0, 1),
            target_chart=np.full(z.shape, self._target_chart),
            chart=chart,
            coord=z,
            kind=GENERAL,
        )
        if order == 2:
            out.u_zz = evaluate(2, 0)
            out.u_zzb = evaluate(1, 1)
            out.u_zbzb = evaluate(0, 2)
        return out

    def describe(self):
        return {"type": "bipolynomial", "dim": self.dim}


class SmoothMapSpec(_BaseMap):
    """Map given by an external jet evaluation contract.

    Parameters
    ----------
    jet_function : callable
        ``jet_function(chart, z, order)`` returning a Jet.
    kind : str, optional (default="general")
        One of ``"holomorphic"``, ``"antiholomorphic"`` or ``"general"``.
    dim : int, optional (default=1)
        Complex dimension of the target.
    """

    def __init__(self, jet_function, kind=GENERAL, dim=1):
        if not callable(jet_function):
            raise TypeError("jet_function must be callable.")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}.")
        self._jet_function = jet_function
        self.kind = kind
        self.dim = int(check_scalar(dim, "dim", (int, np.integer), min_val=1))

    def jets(self, chart, z, order=2):
        _check_chart(chart)
        _check_order(order)
        j = self._jet_function(chart, np.asarray(z, dtype=complex), order)
        if self.kind == HOLOMORPHIC and np.any(j.u_zb != 0):
            raise ValueError("holomorphic jet with a non-zero u_zb.")
        if self.kind == ANTIHOLOMORPHIC and np.any(j.u_z != 0):
            raise ValueError("antiholomorphic jet with a non-zero u_z.")
        return replace(j, kind=self.kind)


class MobiusPullback(_BaseMap):
    """Composition ``w -> m(M . w)`` with a Mobius transformation.

    ``M = [[a, b], [c, d]]`` acts by ``w -> (a w + b) / (c w + d)``; the
    composite is evaluated in whichever base chart owns the image point.
    """

    def __init__(self, base, matrix):
        if not isinstance(base, _BaseMap):
            raise TypeError("base must be a map.")
        M = np.asarray(matrix, dtype=complex)
        if M.shape != (2, 2):
            raise ValueError("matrix must be 2x2.")
        self._det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(self._det) <= 1e-300:
            raise ValueError("matrix must be invertible.")
        self.base = base
        self.matrix = M
        self.kind = base.kind
        self.dim = base.dim

    def _image(self, chart, z):
        (a, b), (c, d) = self.matrix
        if chart == NORTH:
            # X = a z + b, Y = c z + d
            a0, a1, b0, b1 = b, a, d, c
        else:
            # z = 1/w: X = a + b w, Y = c + d w
            a0, a1, b0, b1 = a, b, c, d
        X = a0 + a1 * z
        Y = b0 + b1 * z
        D = a1 * b0 - b1 * a0
        north = np.abs(X) <= np.abs(Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            zn = np.where(north, X / Y, 0)
            dn1, dn2 = D / Y**2, -2 * b1 * D / Y**3
            zs = np.where(north, 0, Y / X)
            ds1, ds2 = -D / X**2, 2 * a1 * D / X**3
        return north, (zn, dn1, dn2), (zs, ds1, ds2)

    def jets(self, chart, z, order=2):
        _check_chart(chart)
        _check_order(order)
        z = np.asarray(z, dtype=complex)
        north, (zn, dn1, dn2), (zs, ds1, ds2) = self._image(chart, z)
        jn = _reparametrize(self.base.jets(NORTH, zn, order), np.where(north, dn1, 0), np.where(north, dn2, 0), chart, z)
        if np.all(north):
            return jn
        js = _reparametrize(self.base.jets(SOUTH, zs, order), np.where(north, 0, ds1), np.where(north, 0, ds2), chart, z)
        return _merge_jets(north, jn, js, z)

    def homogeneous(self, chart, z):
        z = np.asarray(z, dtype=complex)
        north, (zn, _, _), (zs, _, _) = self._image(chart, z)
        hn = self.base.homogeneous(NORTH, zn)
        hs = self.base.homogeneous(SOUTH, zs)
        return np.where(north[None, ...], hn, hs)

    def describe(self):
        return {"type": "mobius-pullback", "matrix": self.matrix, "base": self.base.describe()}


def jet(m, p, order=2):
    """Jet of a map at a single domain point.

    Parameters
    ----------
    m : map
        RationalMap, ProjectiveCurve, SmoothMapSpec or any other map.
    p : ChartPoint
        Domain point.
    order : int, optional (default=2)
        1 or 2.

    Returns
    -------
    jet : Jet
        Fields of shape ``(n,)``; the target chart is switched automatically
        so that ``u`` stays finite at poles.
    """
    if not isinstance(p, ChartPoint):
        raise TypeError("p must be a ChartPoint.")
    return m.jets(p.chart, np.asarray(p.coord, dtype=complex), order)


def _cluster(roots, poly, safety=_CLUSTER_SAFETY):
    """Group roots of ``poly`` that are numerically one multiple root.

    Under a coefficient perturbation ``eta`` a ``k``-fold root ``c`` spreads
    over a radius of about ``(eta k! / |poly^(k)(c)|)^(1/k)``. Starting from
    the largest ``k``, the ``k`` roots nearest to a seed form a group when
    they lie within that radius of their mean.
    """
    coef = np.abs(poly.coef)
    remaining = sorted(roots, key=lambda r: (r.real, r.imag))
    clusters = []
    while remaining:
        seed = remaining[0]
        near = sorted(range(len(remaining)), key=lambda i: abs(remaining[i] - seed))
        chosen = near[:1]
        for k in range(len(remaining), 1, -1):
            group = np.array([remaining[i] for i in near[:k]])
            c = np.mean(group)
            lead = abs(poly.deriv(k)(c)) / factorial(k)
            if lead == 0:
                continue
            noise = _ROOT_NOISE * np.sum(coef * max(1.0, abs(c)) ** np.arange(coef.size))
            if np.max(np.abs(group - c)) <= safety * (noise / lead) ** (1.0 / k):
                chosen = near[:k]
                break
        clusters.append((complex(np.mean([remaining[i] for i in chosen])), len(chosen)))
        remaining = [r for i, r in enumerate(remaining) if i not in chosen]
    return clusters


def ramification(m):
    """Ramification points of a rational map with their multiplicities.

    The zeros of ``du`` are the zeros of the Wronskian ``P' Q - P Q'``; the
    point at infinity carries the missing multiplicity up to ``2 d - 2``.
    Roots that are numerically one multiple root are grouped, with a radius
    growing like the ``k``-th root of the rounding noise.

    Parameters
    ----------
    m : RationalMap or ConjugateMap of a RationalMap
        Non-constant map. For a conjugate map the zeros of ``u_zb`` are
        returned.

    Returns
    -------
    points : list of (ChartPoint, int)
        Each point in the chart that owns it.
    """
    if isinstance(m, ConjugateMap):
        return ramification(m.base)
    if not isinstance(m, RationalMap):
        raise TypeError("ramification requires a RationalMap.")
    if m.degree < 1:
        raise ValueError("ramification requires a non-constant map.")
    W = m.wronskian()
    scale = np.max(np.abs(W.coef))
    if scale == 0:
        raise ValueError("ramification requires a non-constant map.")
    W = W.trim(tol=1e-13 * scale)
    total = 2 * m.degree - 2
    at_infinity = total - W.degree()
    if at_infinity < 0:
        raise FloatingPointError(f"Wronskian degree {W.degree()} exceeds 2d-2 = {total}")

    roots = W.roots() if W.degree() > 0 else np.array([], dtype=complex)
    for r in roots:
        size = np.sum(np.abs(W.coef) * abs(r) ** np.arange(W.coef.size))
        residual = abs(W(r)) / size
        if residual > 1e-8:
            raise FloatingPointError(f"root finding failed at z = {r:.6g}, relative residual {residual:.3e}")

    points = []
    for r, mult in _cluster(roots, W):
        if abs(r) <= 1.0:
            points.append((ChartPoint(NORTH, r), mult))
        else:
            points.append((ChartPoint(SOUTH, 1.0 / r), mult))
    if at_infinity > 0:
        points.append((ChartPoint(SOUTH, 0.0), at_infinity))

    found = sum(mult for _, mult in points)
    if found != total:
        raise FloatingPointError(f"ramification total {found} differs from 2d-2 = {total}")
    logger.debug("ramification of degree %d map: %s", m.degree, points)
    return points


def mobius_pullback(m, lam, c=0.0):
    """Renormalized map ``w -> m(lam * w + c)``.

    Parameters
    ----------
    m : map
    lam : float
        Positive scale.
    c : complex, optional (default=0)
        Translation.

    Returns
    -------
    pulled : MobiusPullback
    """
    check_scalar(lam, "lam", (float, int, np.floating), min_val=0.0, include_boundaries="neither")
    return MobiusPullback(m, [[lam, complex(c)], [0.0, 1.0]])


def veronese(n):
    """Rational normal curve ``z -> [1 : sqrt(C(n,1)) z : ... : z^n]`` in CP^n."""
    n = check_scalar(n, "n", (int, np.integer), min_val=1)
    if n == 1:
        return RationalMap([0, 1], [1])
    components = []
    for k in range(n + 1):
        coef = np.zeros(k + 1)
        coef[k] = np.sqrt(comb(n, k))
        components.append(coef)
    return ProjectiveCurve(components)


def constant_map(value, dim=1):
    """Constant map onto ``value``; ``np.inf`` is the point ``[0 : 1]``."""
    if dim == 1:
        if np.isinf(value):
            return ProjectiveCurve([[0], [1]])
        return ProjectiveCurve([[1], [complex(value)]])
    value = np.asarray(value, dtype=complex)
    return ProjectiveCurve([[1]] + [[v] for v in value])


class MapFamily:
    """Sequence of maps ``u_n`` with a declared limit.

    Parameters
    ----------
    member : callable
        ``member(n)`` returning the map ``u_n``.
    limit : map or None
        Declared limit away from the bubble points.
    schedule : tuple of int, optional (default=(4, 8, 16, 32, 64))
        Indices at which the family is sampled.
    parameters : dict, optional
        Declared parameters, e.g. the ``lambda_n`` schedule.
    description : str, optional
    """

    def __init__(self, member, limit=None, schedule=DEFAULT_SCHEDULE, parameters=None, description=""):
        if not callable(member):
            raise TypeError("member must be callable.")
        schedule = tuple(int(n) for n in schedule)
        if len(schedule) == 0 or any(n < 1 for n in schedule):
            raise ValueError("schedule must be a non-empty list of positive integers.")
        if list(schedule) != sorted(set(schedule)):
            raise ValueError("schedule must be strictly increasing.")
        self._member = member
        self.limit = limit
        self.schedule = schedule
        self.parameters = dict(parameters or {})
        self.description = description

    def member(self, n):
        m = self._member(n)
        if not isinstance(m, _BaseMap):
            raise TypeError(f"member({n}) is not a map.")
        return m

    def members(self):
        """Iterate over ``(n, u_n)`` along the schedule."""
        for n in self.schedule:
            yield n, self.member(n)

    def with_schedule(self, schedule):
        return MapFamily(self._member, self.limit, schedule, self.parameters, self.description)

    def parameter(self, name, n):
        """Value of a declared parameter at index ``n``."""
        value = self.parameters[name]
        return value(n) if callable(value) else value

    def describe(self):
        params = {}
        for k, v in self.parameters.items():
            params[k] = [v(n) for n in self.schedule] if callable(v) else v
        return {"description": self.description, "schedule": list(self.schedule), "parameters": params}


def constant_family(value=0.0, schedule=DEFAULT_SCHEDULE):
    m = constant_map(value)
    return MapFamily(lambda n: m, m, schedule, {"value": value}, "constant map")


def fixed_family(m, schedule=DEFAULT_SCHEDULE, description="fixed map"):
    return MapFamily(lambda n: m, m, schedule, {}, description)


def _geometric_scale(scale, power):
    check_scalar(scale, "scale", (float, int), min_val=0.0, include_boundaries="neither")
    check_scalar(power, "power", (float, int), min_val=0.0, include_boundaries="neither")
    return lambda n: scale / float(n) ** power


def shrinking_identity(center=0.0, scale=0.25, power=3, schedule=DEFAULT_SCHEDULE):
    """``u_n(z) = (z - center) / lambda_n`` with ``lambda_n = scale / n^power``.

    One degree-1 bubble at ``center``; the limit is the constant map at
    infinity.
    """
    lam = _geometric_scale(scale, power)
    center = complex(center)

    def member(n):
        return RationalMap([-center / lam(n), 1.0 / lam(n)], [1.0])

    return MapFamily(
        member,
        constant_map(np.inf),
        schedule,
        {"lambda": lam, "center": center},
        "identity blown up at a point",
    )


def translated_identity(center=0.3 + 0.2j, scale=0.25, power=3, schedule=DEFAULT_SCHEDULE):
    """Shrinking identity concentrating away from the chart origin."""
    family = shrinking_identity(center, scale, power, schedule)
    family.description = "identity blown up at a translated point"
    return family


def two_bubble(a=0.0, b=1.0, scale=0.25, power=3, schedule=DEFAULT_SCHEDULE):
    """``u_n(z) = lambda_n / (z - a) + lambda_n / (z - b)``.

    Two degree-1 bubbles at ``a`` and ``b``; the limit is the constant 0.
    """
    a, b = complex(a), complex(b)
    if a == b:
        raise ValueError("bubble centers a and b must be distinct.")
    lam = _geometric_scale(scale, power)

    def member(n):
        t = lam(n)
        return RationalMap([-t * (a + b), 2 * t], [a * b, -(a + b), 1.0])

    return MapFamily(member, constant_map(0.0), schedule, {"lambda": lam, "a": a, "b": b}, "two separated bubbles")


def bubble_on_bubble(scale=0.25, power=3, ratio=0.7, schedule=(4, 8, 16)):
    """``u_n(z) = lambda_n / z + mu_n / (z - lambda_n)``, ``mu_n = ratio lambda_n / n^power``.

    After blowing up at the origin by ``lambda_n`` a secondary bubble
    remains at ``w = 1``.
    """
    lam = _geometric_scale(scale, power)
    check_scalar(ratio, "ratio", (float, int), min_val=0.0, include_boundaries="neither")

    def mu(n):
        return ratio * lam(n) / float(n) ** power

    def member(n):
        t, s = lam(n), mu(n)
        return RationalMap([-t * t, t + s], [0.0, -t, 1.0])

    return MapFamily(member, constant_map(0.0), schedule, {"lambda": lam, "mu": mu}, "bubble on a bubble")


FAMILIES = {
    "constant": constant_family,
    "shrinking-identity": shrinking_identity,
    "translated-identity": translated_identity,
    "two-bubble": two_bubble,
    "bubble-on-bubble": bubble_on_bubble,
}
