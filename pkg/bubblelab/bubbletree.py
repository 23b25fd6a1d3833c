"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
import warnings
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np
import pandas as pd
from scipy import optimize
from sklearn.utils import check_scalar

from .base import _BaseCheck, _to_builtin
from .densities import _kform, energy_parts
from .geometry import (
    CHARTS,
    NORTH,
    ChartPoint,
    EuclideanDomain,
    affine_coordinates,
    chart_lattice,
    to_chart,
)
from .integration import QuadratureSpec, atom_fit, density_function, integrate_disk, totals
from .maps import Jet, MapFamily, MobiusPullback
from .potential import KeyLemmaCheck

__all__ = [
    "BubbleConfig",
    "BubblePoint",
    "PartitionReport",
    "BubbleNode",
    "BubbleTree",
    "ConePatch",
    "BubbleTreeBuilder",
    "detect_points",
    "epsilon_n",
    "center_of_mass",
    "lambda_n",
    "renormalize",
    "cone_extension",
    "partition",
    "build_tree",
    "DichotomyReport",
    "curvature_dichotomy",
]

logger = logging.getLogger(__name__)

_QUANTITIES = ("e", "q_plus")


class BubbleConfig:
    """Configuration of the bubble tree pipeline.

    Parameters
    ----------
    C_R : float, optional (default=pi/2)
        Renormalization constant, ``0 < C_R < eps_star / 2``.
    eps_star : float, optional (default=2 pi)
        Energy threshold of a bubble point.
    rho : float, optional (default=0.5)
        Radius of the disk around each candidate.
    grid : int, optional (default=64)
        Detection lattice points per chart diameter.
    mass_tolerance : float, optional (default=0.02)
        Relative tolerance of bubble masses.
    neck_tolerance : float, optional (default=0.01)
        Neck energy and curvature allowed on the final index, relative to
        the bubble masses.
    max_depth : int, optional (default=3)
        Maximal depth of the bubble tree.
    growth : float, optional (default=4)
        Minimal growth of the peak energy density along the schedule.
    zero_distance_tolerance : float, optional (default=0.05)
        Distance allowed between the base value and the bubble at the neck.
    spec : QuadratureSpec, optional
        Quadrature used for all integrals, ``QuadratureSpec(n_points=128)``
        by default.
    cone_samples : int, optional (default=64)
        Boundary samples of the cone extensions.
    """

    def __init__(
        self,
        C_R=np.pi / 2,
        eps_star=2 * np.pi,
        rho=0.5,
        grid=64,
        mass_tolerance=0.02,
        neck_tolerance=0.01,
        max_depth=3,
        growth=4.0,
        zero_distance_tolerance=0.05,
        spec=None,
        cone_samples=64,
    ):
        self.eps_star = check_scalar(eps_star, "eps_star", (float, int), min_val=0.0, include_boundaries="neither")
        self.C_R = check_scalar(C_R, "C_R", (float, int), min_val=0.0, include_boundaries="neither")
        if not self.C_R < self.eps_star / 2:
            raise ValueError("C_R must be smaller than eps_star / 2.")
        self.rho = check_scalar(rho, "rho", (float, int), min_val=0.0, max_val=1.0, include_boundaries="right")
        self.grid = check_scalar(grid, "grid", (int, np.integer), min_val=4)
        self.mass_tolerance = check_scalar(mass_tolerance, "mass_tolerance", (float, int), min_val=0.0)
        self.neck_tolerance = check_scalar(neck_tolerance, "neck_tolerance", (float, int), min_val=0.0)
        self.max_depth = check_scalar(max_depth, "max_depth", (int, np.integer), min_val=1)
        self.growth = check_scalar(growth, "growth", (float, int), min_val=1.0)
        self.zero_distance_tolerance = check_scalar(
            zero_distance_tolerance, "zero_distance_tolerance", (float, int), min_val=0.0
        )
        self.spec = QuadratureSpec(n_points=128) if spec is None else spec
        self.cone_samples = check_scalar(cone_samples, "cone_samples", (int, np.integer), min_val=8)
        self.peak_floor = 1e-10
        self.max_peaks = 8

    def describe(self):
        return {
            "C_R": self.C_R,
            "eps_star": self.eps_star,
            "rho": self.rho,
            "grid": int(self.grid),
            "mass_tolerance": self.mass_tolerance,
            "neck_tolerance": self.neck_tolerance,
            "max_depth": int(self.max_depth),
            "growth": self.growth,
            "zero_distance_tolerance": self.zero_distance_tolerance,
            "quadrature": self.spec.describe(),
        }


@dataclass
class BubblePoint:
    """Candidate bubble point with its energy and curvature atoms."""

    location: ChartPoint
    m: float
    q: float
    radius: float
    masses: list = field(default_factory=list)
    curvature_masses: list = field(default_factory=list)
    peaks: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_dict(self):
        return _to_builtin(
            {
                "location": {"chart": self.location.chart, "coord": self.location.coord},
                "m": self.m,
                "q": self.q,
                "radius": self.radius,
                "masses": self.masses,
                "curvature_masses": self.curvature_masses,
                "flags": self.flags,
            }
        )


@dataclass
class PartitionReport:
    """Base, neck and bubble parts of one map at one bubble point."""

    n: int
    eps_n: float
    c_n: complex
    lambda_n: float
    E_base: float
    E_bubble: float
    E_neck: float
    Q_base: float
    Q_bubble: float
    Q_neck: float
    E_disk: float
    Q_disk: float
    E_total: float
    Q_total: float
    neck_diameter: float
    E_cone: float = 0.0
    Q_cone: float = 0.0
    zero_distance: float = None
    split_ratio: float = None
    split_within: bool = None
    flags: list = field(default_factory=list)

    @property
    def residual(self):
        """Relative additivity residual of the parts."""
        parts = self.E_base + self.E_bubble + self.E_neck
        return abs(parts - self.E_total) / max(abs(self.E_total), 1e-300)

    @property
    def rescaled_radius(self):
        return self.eps_n / self.lambda_n

    def to_dict(self):
        out = asdict(self)
        out["residual"] = self.residual
        return _to_builtin(out)


@dataclass
class ConePatch:
    """Radial cone ``exp_p((r / radius) v(theta))`` over a boundary loop."""

    center: np.ndarray
    chart: int
    velocities: np.ndarray
    radius: float
    energy: float
    curvature: float
    max_velocity: float
    target: object = None

    def evaluate(self, z):
        """Patch values at points ``z`` of the disk, relative to its center."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(np.abs(z) > self.radius * (1 + 1e-12)):
            raise ValueError("points lie outside the cone disk.")
        coeffs = np.fft.fft(self.velocities, axis=1) / self.velocities.shape[1]
        k = np.fft.fftfreq(self.velocities.shape[1], 1.0 / self.velocities.shape[1])
        theta = np.angle(z)
        v = coeffs @ np.exp(1j * np.outer(k, theta))
        return self.target.exponential_map(self.center, self.chart, v * np.abs(z) / self.radius)


@dataclass
class BubbleNode:
    """Node of a bubble tree; the root carries the base map."""

    location: ChartPoint
    m: float
    q: float
    depth: int
    bubble_map: object = None
    nu: float = 0.0
    eta: float = 0.0
    bubble_energy: float = None
    limit_energy: float = None
    limit_curvature: float = None
    bubble_curvature: float = None
    children: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    point: BubblePoint = None
    flags: list = field(default_factory=list)

    @property
    def is_leaf(self):
        return len(self.children) == 0

    def to_dict(self):
        return _to_builtin(
            {
                "location": None if self.location is None else {"chart": self.location.chart, "coord": self.location.coord},
                "m": self.m,
                "q": self.q,
                "nu": self.nu,
                "eta": self.eta,
                "bubble_energy": self.bubble_energy,
                "bubble_curvature": self.bubble_curvature,
                "limit_energy": self.limit_energy,
                "limit_curvature": self.limit_curvature,
                "flags": self.flags,
                "children": [c.to_dict() for c in self.children],
            }
        )


class BubbleTree:
    """Recursive decomposition of a family into a base map and bubbles."""

    def __init__(self, root, identities=None, flags=None, config=None, family=None):
        self.root = root
        self.identities = list(identities or [])
        self.flags = list(flags or [])
        self.config = config
        self.family = family

    def nodes(self):
        """Iterate over all bubble nodes, depth first."""
        stack = list(reversed(self.root.children))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self):
        return [node for node in self.nodes() if node.is_leaf]

    @property
    def depth(self):
        return max((node.depth for node in self.nodes()), default=0)

    def energy_residuals(self):
        return [row["energy_residual"] for row in self.identities]

    def curvature_residuals(self):
        return [row["curvature_residual"] for row in self.identities]

    def to_graph(self):
        """View the tree as a ``networkx.DiGraph`` rooted at ``"base"``."""
        graph = nx.DiGraph()
        graph.add_node("base", m=0.0, q=0.0, depth=0, label="base")

        def add(node, parent, name):
            coord = node.location.coord
            graph.add_node(
                name,
                m=node.m,
                q=node.q,
                nu=node.nu,
                eta=node.eta,
                depth=node.depth,
                label=f"{node.location.chart} {coord.real:.3g}{coord.imag:+.3g}i",
            )
            graph.add_edge(parent, name)
            for k, child in enumerate(node.children):
                add(child, name, f"{name}.{k}")

        for k, child in enumerate(self.root.children):
            add(child, "base", f"b{k}")
        return graph

    def partition_frame(self):
        """Per-index partition reports of all nodes as a DataFrame."""
        rows = []
        for name, node in _named_nodes(self.root):
            for report in node.reports:
                row = report.to_dict()
                row.pop("flags")
                c = row.pop("c_n")
                row.update(node=name, depth=node.depth, c_re=c[0], c_im=c[1])
                rows.append(row)
        columns = [
            "node", "depth", "n", "eps_n", "c_re", "c_im", "lambda_n",
            "E_base", "E_bubble", "E_neck", "Q_base", "Q_bubble", "Q_neck",
            "E_disk", "Q_disk", "E_total", "Q_total", "neck_diameter",
            "E_cone", "Q_cone", "zero_distance", "split_ratio", "split_within", "residual",
        ]
        return pd.DataFrame(rows, columns=columns)

    def to_dict(self):
        return _to_builtin(
            {
                "base": {"description": self.family.description if self.family else "", "flags": self.root.flags},
                "bubbles": [node.to_dict() for node in self.root.children],
                "identities": self.identities,
                "leaves": len(self.leaves()),
                "flags": self.flags,
                "config": self.config.describe() if self.config else None,
            }
        )


def _named_nodes(root):
    out = []

    def visit(node, name):
        out.append((name, node))
        for k, child in enumerate(node.children):
            visit(child, f"{name}.{k}")

    for k, child in enumerate(root.children):
        visit(child, f"b{k}")
    return out


# ---------------------------------------------------------------------------
# Densities with a reference map removed


def _stacked_density(m, domain, target, reference=None, quantities=_QUANTITIES):
    f = density_function(m, domain, target, quantities)
    if reference is None:
        return f
    g = density_function(reference, domain, target, quantities)

    def density(chart, z):
        return f(chart, z) - g(chart, z)

    return density


def _disk(density, domain, chart, center, radius, spec, inner_radius=0.0):
    return np.atleast_1d(integrate_disk(density, domain, chart, center, radius, spec, inner_radius))


def _refine_peak(density, chart, z0, size):
    """Nelder-Mead on ``-log`` of the energy density, with shrinking simplices."""

    def objective(x):
        v = float(density(chart, np.array([x[0] + 1j * x[1]]))[0, 0])
        return -np.log(v) if v > 0 else 1e300

    x = np.array([z0.real, z0.imag])
    for scale in (size, size * 1e-4, size * 1e-8):
        simplex = np.array([x, x + [scale, 0.0], x + [0.0, scale]])
        res = optimize.minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-4 * scale, "fatol": 1e-12, "maxiter": 2000},
        )
        x = res.x
        if np.hypot(*x) > 1.5:
            break
    return complex(x[0], x[1])


def _chart_gap(p, q):
    """Distance of ``q`` from ``p`` in the coordinate of ``p``'s chart."""
    with np.errstate(divide="ignore", invalid="ignore"):
        zq = to_chart(q.chart, q.coord, p.chart)
    return float(abs(zq - p.coord)) if np.isfinite(zq) else np.inf


def _find_peaks(m, domain, target, reference, config, charts=CHARTS):
    """Local maxima of ``e(m) - e(reference)`` refined to machine accuracy."""
    density = _stacked_density(m, domain, target, reference, ("e",))
    h = 2.0 / config.grid
    lattice = chart_lattice(h, 1.0, margin=0)
    lattice = lattice[np.abs(lattice) <= 1.0]
    found, blocked = [], []
    for chart in charts:
        values = density(chart, lattice)[0]
        available = np.isfinite(values)
        for _ in range(4 * config.max_peaks):
            if len(found) >= config.max_peaks:
                break
            for p in [f[0] for f in found] + blocked:
                with np.errstate(divide="ignore", invalid="ignore"):
                    gap = np.abs(to_chart(chart, lattice, p.chart) - p.coord)
                available &= ~(gap < config.rho)
            candidates = np.where(available, values, -np.inf)
            k = int(np.argmax(candidates))
            if not candidates[k] > config.peak_floor:
                break
            available[k] = False
            loc = _refine_peak(density, chart, lattice[k], h)
            if abs(loc) > 1.5:
                blocked.append(ChartPoint(chart, lattice[k]))
                continue
            p = ChartPoint(chart, loc).canonical()
            if any(_chart_gap(p, q) < 0.5 * config.rho for q, _ in found):
                blocked.append(ChartPoint(chart, lattice[k]))
                continue
            value = float(density(p.chart, np.array([p.coord]))[0, 0])
            found.append((p, value))
            logger.debug("peak at %s: e=%.6g", p, value)
    return found


# ---------------------------------------------------------------------------
# Operations


def detect_points(family, domain, target, config=None, charts=CHARTS, limit="declared"):
    """Candidate bubble points of a family.

    Parameters
    ----------
    family : MapFamily
    domain : domain surface
    target : Kahler target
    config : BubbleConfig, optional
    charts : tuple of str, optional
        Charts searched; renormalized families use the north chart only.
    limit : map, None or "declared", optional (default="declared")
        Reference map removed from the densities; ``"declared"`` uses
        ``family.limit``. Without a limit the smooth part of the disk masses
        is removed by extrapolation between the radii ``r`` and ``r / 2``.

    Returns
    -------
    points : list of BubblePoint
        Points where the peak energy density grows along the schedule and
        the disk energy stays at least ``eps_star``; possibly empty. A
        schedule with a single index shows no concentration and gives no
        points.
    """
    config = BubbleConfig() if config is None else config
    if not isinstance(family, MapFamily):
        raise TypeError("family must be a MapFamily.")
    reference = family.limit if limit == "declared" else limit
    if len(family.schedule) < 2:
        logger.warning("schedule %s has a single index; no concentration can be observed", family.schedule)
        return []

    per_index = {n: _find_peaks(m, domain, target, reference, config, charts) for n, m in family.members()}
    last = family.schedule[-1]

    growing = []
    for p, value in per_index[last]:
        history = []
        for n in family.schedule:
            near = [(q, v) for q, v in per_index[n] if _chart_gap(p, q) < 0.5 * config.rho]
            history.append((n, max(v for _, v in near) if near else np.nan))
        seen = [v for _, v in history if np.isfinite(v)]
        if not (len(seen) >= 2 and seen[-1] >= config.growth * seen[0]):
            logger.debug("peak at %s does not grow along the schedule", p)
            continue
        growing.append((p, history))

    points = []
    for i, (p, history) in enumerate(growing):
        others = [_chart_gap(p, q) for j, (q, _) in enumerate(growing) if j != i]
        radius = min(config.rho, 0.45 * min(others, default=np.inf))
        if reference is None:
            radius = min(radius, config.rho / 16.0)
        masses, qmasses = [], []
        for n, m in family.members():
            density = _stacked_density(m, domain, target, reference)
            if reference is None:
                big = _disk(density, domain, p.chart, p.coord, radius, config.spec)
                small = _disk(density, domain, p.chart, p.coord, 0.5 * radius, config.spec)
                values = (4.0 * small - big) / 3.0
            else:
                values = _disk(density, domain, p.chart, p.coord, radius, config.spec)
            masses.append((n, radius, float(values[0])))
            qmasses.append((n, radius, float(values[1])))
        flags = []
        if reference is None:
            flags.append("limit undeclared: smooth part removed by extrapolation")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m_fit, diag = atom_fit(masses, rtol=config.mass_tolerance)
            q_fit, qdiag = atom_fit(qmasses, rtol=config.mass_tolerance)
        flags += diag["flags"] + [f"curvature: {f}" for f in qdiag["flags"]]
        m_val = m_fit if m_fit is not None else masses[-1][2]
        q_val = q_fit if q_fit is not None else qmasses[-1][2]
        if m_val < config.eps_star * (1.0 - config.mass_tolerance):
            logger.debug("peak at %s rejected: mass %.6g below eps_star", p, m_val)
            continue
        if q_val < np.pi / 2 * (1.0 - config.mass_tolerance):
            flags.append(f"curvature mass {q_val:.4g} below pi/2")
        point = BubblePoint(p, m_val, q_val, radius, masses, qmasses, history, {"energy": diag, "curvature": qdiag}, flags)
        logger.info("bubble point at %s: m=%.6g q=%.6g", p, m_val, q_val)
        points.append(point)
    return points


def epsilon_n(limit, x, n, m, config=None, domain=None, target=None, rho=None):
    """Largest ``eps <= min(rho, 1/n)`` with ``int_{D(x, 2 eps)} e(u) <= m / (16 n^2)``.

    Parameters
    ----------
    limit : map or None
        Limit map; None returns ``min(rho, 1/n)``.
    x : ChartPoint
    n : int
    m : float
        Atom mass at ``x``.
    config : BubbleConfig, optional
    domain, target : optional
        Required with a limit map.
    rho : float, optional
        Overrides ``config.rho``.

    Returns
    -------
    eps : float
    """
    config = BubbleConfig() if config is None else config
    cap = min(config.rho if rho is None else rho, 1.0 / n)
    if limit is None:
        return cap
    density = density_function(limit, domain, target, ("e",))
    threshold = m / (16.0 * n**2)

    def excess(eps):
        return float(_disk(density, domain, x.chart, x.coord, 2.0 * eps, config.spec)[0]) - threshold

    if excess(cap) <= 0:
        return cap
    lo = cap * 1e-12
    return float(optimize.bisect(excess, lo, cap, xtol=1e-14, rtol=1e-12))


def center_of_mass(u, chart, center, radius, domain, target, spec=None):
    """Energy center of mass of ``u`` on the disk ``D(center, radius)``.

    Returns
    -------
    c : complex
        Chart coordinate of the center of mass.
    """
    spec = QuadratureSpec() if spec is None else spec
    energy = density_function(u, domain, target, ("e",))
    center = complex(center)

    def moments(ch, z):
        e = energy(ch, z)[0]
        return np.stack([e, e * (z.real - center.real), e * (z.imag - center.imag)])

    mass, mx, my = _disk(moments, domain, chart, center, radius, spec)
    if not mass > 0:
        raise ValueError("zero disk energy: center of mass undefined.")
    return center + complex(mx / mass, my / mass)


def lambda_n(u, chart, c, eps, config, domain, target):
    """Scale at which the annulus energy ``int_{D(c, eps) - D(c, lam)} e`` equals ``C_R``.

    The annulus energy decreases in ``lam``; the crossing point is found
    by bisection in ``log lam``.
    """
    density = density_function(u, domain, target, ("e",))
    total = float(_disk(density, domain, chart, c, eps, config.spec)[0])
    if total < config.C_R:
        raise ValueError(f"no concentration at this scale: disk energy {total:.6g} < C_R")

    def excess(t):
        inner = float(_disk(density, domain, chart, c, np.exp(t), config.spec)[0])
        return total - inner - config.C_R

    lo, hi = np.log(eps) - np.log(10.0) * config.spec.decades, np.log(eps)
    if excess(lo) < 0:
        raise FloatingPointError("concentration below the resolved scales; increase the quadrature depth.")
    return float(np.exp(optimize.bisect(excess, lo, hi, xtol=1e-10)))


def _chart_mobius(chart, lam, c):
    """Matrix of ``w -> c + lam w`` in the given chart, as a north-chart Mobius map."""
    if chart == NORTH:
        return [[lam, c], [0.0, 1.0]]
    return [[0.0, 1.0], [lam, c]]


def renormalize(u, lam, c, chart=NORTH, eps=None, domain=None, target=None, spec=None):
    """Blow up ``u`` at ``c`` by ``lam``.

    Parameters
    ----------
    u : map
    lam : float
        Scale, positive.
    c : complex
        Center in the coordinate of ``chart``.
    chart : str, optional (default="north")
    eps : float, optional
        Radius of the renormalized disk; with ``domain`` and ``target``
        the mass conservation diagnostics are computed.

    Returns
    -------
    u_tilde : MobiusPullback
        ``w -> u(c + lam w)``.
    diagnostics : dict
        ``mass``, ``curvature``, ``mass_outside``, ``center``,
        ``mass_residual`` and ``curvature_residual``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive.")
    u_tilde = MobiusPullback(u, _chart_mobius(chart, lam, complex(c)))
    if eps is None:
        return u_tilde, {}
    spec = QuadratureSpec() if spec is None else spec
    R = eps / lam
    original = _disk(_stacked_density(u, domain, target), domain, chart, c, eps, spec)
    rescaled = _stacked_density(u_tilde, domain, target)
    inside = _disk(rescaled, domain, NORTH, 0.0, R, spec)
    outside = _disk(rescaled, domain, NORTH, 0.0, R, spec, inner_radius=1.0) if R > 1 else np.zeros(2)
    c_tilde = center_of_mass(u_tilde, NORTH, 0.0, R, domain, target, spec)
    diagnostics = {
        "mass": float(inside[0]),
        "curvature": float(inside[1]),
        "mass_outside": float(outside[0]),
        "center": c_tilde,
        "mass_residual": float(abs(inside[0] - original[0]) / max(abs(original[0]), 1e-300)),
        "curvature_residual": float(abs(inside[1] - original[1]) / max(abs(original[1]), 1e-300)),
    }
    return u_tilde, diagnostics


def cone_extension(boundary, center, radius, target, chart=0):
    """Cone off a boundary loop in geodesic normal coordinates.

    Parameters
    ----------
    boundary : array-like, shape (dim, M)
        Loop samples at equally spaced angles, affine coordinates of ``chart``.
    center : array-like, shape (dim,)
        Cone point ``p``.
    radius : float
        Radius of the disk carrying the cone.
    target : Kahler target
    chart : int, optional (default=0)

    Returns
    -------
    patch : ConePatch
        Energy and positive curvature of ``(r / radius) v(theta)`` with
        ``v = log_p`` of the loop, both computed with the metric at ``p``.
    """
    boundary = np.atleast_2d(np.asarray(boundary, dtype=complex))
    center = np.asarray(center, dtype=complex).reshape(-1)
    dim, M = boundary.shape
    if center.shape != (dim,):
        raise ValueError("center and boundary dimensions differ.")
    v = target.log_map(center, chart, boundary)
    u = np.broadcast_to(center[:, None], (dim, M)).copy()
    Hm = target.metric(u, np.full(M, chart))
    speed = np.sqrt(np.maximum(np.real(np.einsum("ab...,a...,b...->...", Hm, v, np.conj(v))), 0.0))
    if np.max(speed) >= 0.5 * target.injectivity_radius():
        raise ValueError("boundary loop does not fit in a normal ball around the cone point.")

    coeffs = np.fft.fft(v, axis=1) / M
    k = np.fft.fftfreq(M, 1.0 / M)
    theta = 2 * np.pi * np.arange(M) / M
    # r e^{ik theta} = z^{(1+k)/2} zb^{(1-k)/2}
    G = np.einsum("ak,km->am", coeffs * (1 + k) / 2, np.exp(1j * np.outer(k - 1, theta)))
    Gt = np.einsum("ak,km->am", coeffs * (1 - k) / 2, np.exp(1j * np.outer(k + 1, theta)))
    j = Jet(u=u, u_z=G, u_zb=Gt, target_chart=np.full(M, chart), chart=NORTH, coord=np.exp(1j * theta))
    flat = EuclideanDomain()
    e1, e2 = energy_parts(j, flat, target)
    K = target.curvature_tensor(u, j.target_chart)
    A_holo = _kform(K, G, G, G, G) - _kform(K, G, G, Gt, Gt)
    A_anti = _kform(K, Gt, Gt, G, G) - _kform(K, Gt, Gt, Gt, Gt)
    hg = np.real(np.einsum("ab...,a...,b...->...", Hm, G, np.conj(G)))
    ht = np.real(np.einsum("ab...,a...,b...->...", Hm, Gt, np.conj(Gt)))
    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = np.where(hg > 0, -np.real(A_holo) / hg, 0.0)
        q2 = np.where(ht > 0, np.real(A_anti) / ht, 0.0)
    dtheta = 2 * np.pi / M
    energy = 0.5 * float(np.sum(e1 + e2)) * dtheta
    curvature = 0.5 * float(np.sum(np.maximum(q1, 0.0) + np.maximum(q2, 0.0))) * dtheta
    return ConePatch(center, chart, v, float(radius), energy, curvature, float(np.max(speed)), target)


def _loop(u, chart, center, radius, samples):
    theta = 2 * np.pi * np.arange(samples) / samples
    return u.homogeneous(chart, complex(center) + radius * np.exp(1j * theta))


def _cone_at(u, chart, c, radius, p_hom, config, target):
    """Cone patch over the loop ``u(c + radius e^{i theta})`` centered at ``p``."""
    p, pchart = affine_coordinates(p_hom)
    loop = affine_coordinates(_loop(u, chart, c, radius, config.cone_samples), int(pchart))
    return cone_extension(loop, p, radius, target, int(pchart))


def _neck_diameter(u, chart, c, inner, outer, target, n_radii=24, n_angles=48):
    r = np.geomspace(inner, outer, n_radii)
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    z = (complex(c) + r[:, None] * np.exp(1j * theta[None, :])).ravel()
    Z = u.homogeneous(chart, z)
    diameter = 0.0
    for start in range(0, Z.shape[1], 256):
        block = Z[:, start:start + 256]
        d = target.distance(block[:, :, None], Z[:, None, :])
        diameter = max(diameter, float(np.max(d)))
    return diameter


def partition(u, x, n, config, domain, target, eps=None, c=None, lam=None, totals_=None, base_value=None, q=None):
    """Base, neck and bubble energies of ``u_n`` at one bubble point.

    Parameters
    ----------
    u : map
        The map ``u_n``.
    x : ChartPoint
        Bubble point.
    n : int
    config : BubbleConfig
    domain, target
    eps, c, lam : float, complex, float, optional
        Scales of the point; computed when missing.
    totals_ : Totals, optional
        Totals of ``u_n``; computed with a focus disk at ``c`` when missing.
    base_value : array-like, optional
        Homogeneous value of the base map at ``x``; defaults to the value of
        ``u`` on the outer neck boundary.
    q : float, optional
        Curvature mass of the point. When given, the split of ``Q_+`` between
        the bubble disk and the neck is compared with ``q / (8 n^2)``.

    Returns
    -------
    report : PartitionReport
    """
    if eps is None:
        eps = epsilon_n(None, x, n, 0.0, config)
    if c is None:
        c = center_of_mass(u, x.chart, x.coord, eps, domain, target, config.spec)
    if lam is None:
        lam = lambda_n(u, x.chart, c, eps, config, domain, target)
    if n * lam >= eps:
        raise ValueError(f"scales not separated; increase n (n lambda_n = {n * lam:.3e} >= eps_n = {eps:.3e})")
    if totals_ is None:
        totals_ = totals(u, domain, target, config.spec, focus=[(ChartPoint(x.chart, c), eps)])
    density = _stacked_density(u, domain, target)
    bubble = _disk(density, domain, x.chart, c, n * lam, config.spec)
    neck = _disk(density, domain, x.chart, c, eps, config.spec, inner_radius=n * lam)
    disk = _disk(density, domain, x.chart, c, eps, config.spec)
    flags = []
    if lam > eps / n**2:
        flags.append("lambda_n > eps_n / n^2")
    if abs(c - x.coord) > eps / (2.0 * n**2):
        flags.append("|c_n - x| > eps_n / (2 n^2)")

    if base_value is None:
        base_value = u.homogeneous(x.chart, np.array([c + eps]))[:, 0]
    inner_value = u.homogeneous(x.chart, np.array([c + n * lam]))[:, 0]
    zero_distance = float(target.distance(np.asarray(base_value), inner_value))
    split_ratio = split_within = None
    if q is not None and q > 0:
        slack = q / (8.0 * n**2)
        split_ratio = float(bubble[1] / q)
        split_within = bool(abs(bubble[1] - q) <= slack and neck[1] <= slack)
        if not split_within:
            flags.append(f"curvature split off by {abs(bubble[1] - q):.3g} (allowed {slack:.3g})")

    E_cone = Q_cone = 0.0
    try:
        outer_cone = _cone_at(u, x.chart, c, eps, base_value, config, target)
        inner_cone = _cone_at(u, x.chart, c, n * lam, base_value, config, target)
        E_cone = outer_cone.energy + inner_cone.energy
        Q_cone = outer_cone.curvature + inner_cone.curvature
    except (ValueError, FloatingPointError) as err:
        flags.append(f"cone extension failed: {err}")

    report = PartitionReport(
        n=int(n),
        eps_n=float(eps),
        c_n=complex(c),
        lambda_n=float(lam),
        E_base=float(totals_.E - disk[0]),
        E_bubble=float(bubble[0]),
        E_neck=float(neck[0]),
        Q_base=float(totals_.Q_plus - disk[1]),
        Q_bubble=float(bubble[1]),
        Q_neck=float(neck[1]),
        E_disk=float(disk[0]),
        Q_disk=float(disk[1]),
        E_total=float(totals_.E),
        Q_total=float(totals_.Q_plus),
        neck_diameter=_neck_diameter(u, x.chart, c, n * lam, eps, target),
        E_cone=E_cone,
        Q_cone=Q_cone,
        zero_distance=zero_distance,
        split_ratio=split_ratio,
        split_within=split_within,
        flags=flags,
    )
    logger.debug(
        "partition n=%d at %s: eps=%.4g lam=%.4g E=(%.6g, %.6g, %.6g)",
        n, x, eps, lam, report.E_base, report.E_neck, report.E_bubble,
    )
    return report


# ---------------------------------------------------------------------------
# Tree assembly


class BubbleTreeBuilder(_BaseCheck):
    """Build the bubble tree of a family and check its identities.

    The energy identity ``E(u_n) = E(u) + sum_i (nu_i + E(bubbles_i))`` and
    its curvature counterpart for ``Q_+`` are checked along the schedule.
    The bubble energies are those of the renormalized map of the final
    index on its bubble disk, so each index compares the neck energy left
    over by the identity with the measured neck energy. Each bubble
    must also carry ``m_i >= eps_star`` and ``q_i >= 2 pi``, with
    neck energy and curvature below ``neck_tolerance`` of the masses on
    the final index.

    Parameters
    ----------
    config : BubbleConfig, optional
    """

    def __init__(self, config=None):
        self._config = BubbleConfig() if config is None else config
        super().__init__(self._config.mass_tolerance)

    def fit(self, family, domain, target):
        """Detect, renormalize and partition recursively.

        Parameters
        ----------
        family : MapFamily
        domain : domain surface
        target : Kahler target

        Returns
        -------
        self : object
        """
        cfg = self._config
        self._domain, self._target = domain, target
        if not target.distance_is_exact:
            self._flag("target distance is an upper bound: neck diameters and zero distances are conservative", warn=False)
        points = detect_points(family, domain, target, cfg)
        root = BubbleNode(location=None, m=0.0, q=0.0, depth=0, bubble_map=family.limit)
        if family.limit is None:
            root.flags.append("limit undeclared: base energy not available")

        nodes = [self._node(family, p, 1, family.limit) for p in points]
        root.children = nodes

        identities = []
        limit_totals = totals(family.limit, domain, target, cfg.spec) if family.limit is not None else None
        for n, u in family.members():
            parts = [(node, r) for node in nodes for r in node.reports if r.n == n]
            if len(parts) != len(nodes):
                continue
            focus = [(ChartPoint(node.location.chart, r.c_n), r.eps_n) for node, r in parts]
            t = totals(u, domain, target, cfg.spec, focus=focus) if focus else totals(u, domain, target, cfg.spec)
            base_E = limit_totals.E if limit_totals else np.nan
            base_Q = limit_totals.Q_plus if limit_totals else np.nan
            # necks implied by the limit bubbles against the measured necks
            neck_implied = t.E - base_E - sum(node.limit_energy for node, _ in parts)
            neck_q_implied = t.Q_plus - base_Q - sum(node.limit_curvature for node, _ in parts)
            neck = sum(r.E_neck for _, r in parts)
            neck_q = sum(r.Q_neck for _, r in parts)
            E_res = neck_implied - neck
            Q_res = neck_q_implied - neck_q
            identities.append(
                {
                    "n": n,
                    "E": t.E,
                    "Q_plus": t.Q_plus,
                    "neck_implied": float(neck_implied),
                    "neck": float(neck),
                    "neck_curvature_implied": float(neck_q_implied),
                    "neck_curvature": float(neck_q),
                    "energy_residual": float(abs(E_res) / max(t.E, 1e-300)),
                    "curvature_residual": float(abs(Q_res) / max(t.Q_plus, 1e-300)),
                }
            )

        tree = BubbleTree(root, identities, config=cfg, family=family)
        self._tree = tree
        self._verify(tree, family)
        logger.info("bubble tree: %d bubbles, %d leaves, passed=%s", len(list(tree.nodes())), len(tree.leaves()), self._passed)
        return self

    def _node(self, family, point, depth, limit):
        cfg, domain, target = self._config, self._domain, self._target
        x = point.location
        node = BubbleNode(location=x, m=point.m, q=point.q, depth=depth, point=point, flags=list(point.flags))
        if limit is None:
            node.flags.append("limit undeclared: eps_n = min(rho, 1/n)")
        renormalized, schedule = {}, []
        for n, u in family.members():
            try:
                eps = epsilon_n(limit, x, n, point.m, cfg, domain, target, rho=point.radius)
                c = center_of_mass(u, x.chart, x.coord, eps, domain, target, cfg.spec)
                lam = lambda_n(u, x.chart, c, eps, cfg, domain, target)
                base_value = limit.homogeneous(x.chart, np.array([x.coord]))[:, 0] if limit is not None else None
                report = partition(u, x, n, cfg, domain, target, eps, c, lam, base_value=base_value, q=point.q)
                u_tilde, diag = renormalize(u, lam, c, x.chart, eps, domain, target, cfg.spec)
            except (ValueError, FloatingPointError) as err:
                node.flags.append(f"n={n}: {err}")
                logger.warning("bubble at %s, n=%d: %s", x, n, err)
                continue
            report.flags += [
                f"renormalization does not conserve {k.split('_')[0]} ({diag[k]:.2e})"
                for k in ("mass_residual", "curvature_residual")
                if diag[k] > 1e-6
            ]
            node.reports.append(report)
            renormalized[n] = u_tilde
            schedule.append(n)
        if not schedule:
            node.flags.append("no index with separated scales")
            return node

        last = node.reports[-1]
        node.nu, node.eta = last.E_neck, last.Q_neck
        node.bubble_map = renormalized[schedule[-1]]
        # the bubble disk D(c, N lambda_N) is D(0, N) after renormalization
        omega = _disk(_stacked_density(node.bubble_map, domain, target), domain, NORTH, 0.0, float(schedule[-1]), cfg.spec)
        node.limit_energy, node.limit_curvature = float(omega[0]), float(omega[1])
        sub = MapFamily(lambda n: renormalized[n], None, schedule, {}, f"renormalized at {x}")
        children = []
        if depth < cfg.max_depth:
            for y in detect_points(sub, domain, target, cfg, charts=(NORTH,), limit=None):
                if abs(y.location.coord) > 1.0 + 1e-9 or y.location.chart != NORTH:
                    node.flags.append(f"secondary point {y.location} outside the northern hemisphere")
                    continue
                children.append(self._node(sub, y, depth + 1, None))
        else:
            peaks = _find_peaks(node.bubble_map, domain, target, None, cfg, (NORTH,))
            if len(peaks) > 1:
                node.flags.append("maximal depth reached; deeper bubbles not resolved")
        node.children = children

        inner = sum(ch.reports[-1].E_neck + ch.reports[-1].E_bubble for ch in children if ch.reports)
        inner_q = sum(ch.reports[-1].Q_neck + ch.reports[-1].Q_bubble for ch in children if ch.reports)
        node.bubble_energy = last.E_bubble - inner
        node.bubble_curvature = last.Q_bubble - inner_q
        if node.bubble_energy < cfg.mass_tolerance * cfg.eps_star and len(children) >= 2:
            node.flags.append("untested branch: constant bubble with secondary points")
        if node.nu >= cfg.C_R * (1.0 - cfg.mass_tolerance):
            node.flags.append("untested branch: neck energy reaches C_R")
        return node

    def _verify(self, tree, family):
        cfg = self._config
        omega = self._target.max_curvature_operator_norm()
        ok = True
        if len(family.schedule) < 2:
            ok = False
            self._flag("a single index cannot show concentration; use a longer schedule")
        for node in tree.nodes():
            if not node.reports:
                ok = False
                self._flag(f"bubble at {node.location}: no partition available")
                continue
            if node.m < cfg.eps_star * (1.0 - cfg.mass_tolerance):
                ok = False
                self._flag(f"bubble at {node.location}: m = {node.m:.6g} below eps_star")
            if node.q < 2 * np.pi * (1.0 - cfg.mass_tolerance):
                ok = False
                self._flag(f"bubble at {node.location}: q = {node.q:.6g} below 2 pi")
            if node.nu > cfg.neck_tolerance * node.m or node.eta > cfg.neck_tolerance * max(node.q, 0.0):
                ok = False
                self._flag(f"bubble at {node.location}: neck energy {node.nu:.3g} or curvature {node.eta:.3g} too large")
            for r in node.reports:
                if r.Q_neck > 2 * np.sqrt(2) * omega * r.E_neck * (1 + 1e-6) + 1e-12:
                    ok = False
                    self._flag(f"n={r.n}: neck curvature exceeds 2 sqrt 2 max|Omega| neck energy")
            distances = [r.zero_distance for r in node.reports]
            if distances[-1] > cfg.zero_distance_tolerance:
                self._flag(f"bubble at {node.location}: base and bubble do not meet ({distances[-1]:.3g})")
                ok = False
            for f in node.flags:
                if f.startswith("untested branch") or f.startswith("maximal depth"):
                    self._flag(f)
        if tree.identities:
            last = tree.identities[-1]
            for key in ("energy_residual", "curvature_residual"):
                if np.isfinite(last[key]) and last[key] > cfg.neck_tolerance:
                    ok = False
                    self._flag(f"{key} {last[key]:.3g} on the final index")
            bound = max(row["E"] for row in tree.identities) / cfg.eps_star
            if len(tree.leaves()) > bound + 1e-9:
                ok = False
                self._flag("more leaves than the energy allows")
        tree.flags = list(self._flags)
        self._passed = ok

    @property
    def tree_(self):
        self._check_is_fitted()
        return self._tree

    def _summary(self):
        return {"tree": self._tree.to_dict()}


def build_tree(family, domain, target, config=None):
    """Run :class:`BubbleTreeBuilder` and return the :class:`BubbleTree`."""
    return BubbleTreeBuilder(config).fit(family, domain, target).tree_


# ---------------------------------------------------------------------------
# Small curvature dichotomy


@dataclass
class DichotomyReport:
    """Curvature mass and half-disk energy norms of a family on one disk."""

    center: ChartPoint
    radius: float
    p: float
    frame: pd.DataFrame

    @property
    def hypothesis_holds(self):
        """Whether the curvature mass stays below ``pi / 2`` on every index."""
        return bool(np.all(self.frame["curvature_mass"] < np.pi / 2))

    @property
    def bounded(self):
        norms = self.frame["lp_norm"].to_numpy()
        return bool(np.max(norms) <= 4.0 * norms[0])

    @property
    def consistent(self):
        return (not self.hypothesis_holds) or self.bounded

    def to_dict(self):
        return _to_builtin(
            {
                "center": {"chart": self.center.chart, "coord": self.center.coord},
                "radius": self.radius,
                "p": self.p,
                "hypothesis_holds": self.hypothesis_holds,
                "bounded": self.bounded,
                "consistent": self.consistent,
                "rows": self.frame.to_dict(orient="records"),
            }
        )


def curvature_dichotomy(family, domain, target, center, radius, p=2.0, config=None, step=1.0 / 32):
    """Small curvature mass versus bounded energy norms on a disk.

    For each index, ``int q_+ + (1/2) int |K|`` over ``D(center, radius)``
    is compared with ``pi / 2`` and the ``L^p`` norm of the energy density
    on the half disk is recorded. Where the curvature mass is admissible,
    the key lemma chain is run on the logarithm of the rescaled Euclidean
    energy density.

    Returns
    -------
    report : DichotomyReport
    """
    config = BubbleConfig() if config is None else config
    if not isinstance(center, ChartPoint):
        raise TypeError("center must be a ChartPoint.")
    rows = []
    for n, u in family.members():
        density = density_function(u, domain, target, ("e", "q_plus"))

        def curvature(ch, z, density=density):
            d = density(ch, z)
            return np.stack([d[1], np.abs(domain.gauss_curvature(ch, z))])

        q_mass, k_mass = _disk(curvature, domain, center.chart, center.coord, radius, config.spec)

        def power(ch, z, density=density):
            return density(ch, z)[0] ** p

        lp = float(_disk(power, domain, center.chart, center.coord, 0.5 * radius, config.spec)[0]) ** (1.0 / p)
        s = float(q_mass + 0.5 * k_mass)

        def phi(w, u=u):
            z = center.coord + radius * np.asarray(w, dtype=complex)
            j = u.jets(center.chart, z.ravel(), 1)
            e1, e2 = energy_parts(j, domain, target)
            euclidean = (e1 + e2) * domain.conformal_factor(center.chart, z.ravel()) * radius**2
            with np.errstate(divide="ignore"):
                return np.log(euclidean).reshape(z.shape)

        key_lemma = None
        if s < np.pi / 2:
            try:
                key_lemma = bool(KeyLemmaCheck(p, step).fit(phi).passed_)
            except ValueError as err:
                logger.debug("key lemma not applicable at n=%d: %s", n, err)
        rows.append({"n": n, "curvature_mass": s, "hypothesis": s < np.pi / 2, "lp_norm": lp, "key_lemma": key_lemma})
    frame = pd.DataFrame(rows, columns=["n", "curvature_mass", "hypothesis", "lp_norm", "key_lemma"])
    return DichotomyReport(center, float(radius), float(p), frame)

