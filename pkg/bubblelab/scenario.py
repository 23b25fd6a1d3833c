"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import logging
import os
import re

import numpy as np
import yaml

from .bubbletree import BubbleConfig
from .geometry import (
    ConformalDomain,
    EuclideanDomain,
    FlatTarget,
    FubiniStudyTarget,
    PerturbedRoundTarget,
    RoundSphere,
    RoundTarget,
    truncated_linear_phi,
)
from .integration import QuadratureSpec
from .maps import (
    FAMILIES,
    BipolynomialMap,
    ConjugateMap,
    ProjectiveCurve,
    RationalMap,
    constant_map,
    fixed_family,
    veronese,
)
from .potential import DiskMeasure

__all__ = ["Scenario", "ScenarioError", "parse_number", "parse_complex", "parse_schedule", "VERIFY_CHECKS"]

logger = logging.getLogger(__name__)

VERIFY_CHECKS = ("erels", "pointwise", "bochner", "theorem1", "energy_bounds", "conformal")

_SECTIONS = ("name", "domain", "target", "map", "family", "analysis", "potential", "output")

_NUMBER = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?P<coef>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)?\s*(?P<pi>\*?\s*pi)?"
    r"\s*(/\s*(?P<den>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?))?\s*$"
)


class ScenarioError(ValueError):
    """Invalid scenario field, with its dotted path and source line."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = path or "scenario"
        if line is not None:
            where = f"{where} (line {line})"
        super().__init__(f"{where}: {message}")


def parse_number(value):
    """Real number from YAML, accepting ``4pi``, ``pi/2``, ``2*pi`` and ``1/64``."""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}.")
    if isinstance(value, (int, float, np.integer, np.floating)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number, got {value!r}.")
    match = _NUMBER.match(value)
    if match is None or (match["coef"] is None and match["pi"] is None):
        raise ValueError(f"cannot parse {value!r} as a number.")
    x = float(match["coef"]) if match["coef"] is not None else 1.0
    if match["pi"] is not None:
        x *= np.pi
    if match["den"] is not None:
        den = float(match["den"])
        if den == 0:
            raise ValueError(f"division by zero in {value!r}.")
        x /= den
    return -x if match["sign"] == "-" else x


def parse_complex(value):
    """Complex number from a real, a ``[re, im]`` pair or a string like ``0.3+0.2j``."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"a complex pair needs two entries, got {len(value)}.")
        return complex(parse_number(value[0]), parse_number(value[1]))
    try:
        return complex(parse_number(value))
    except ValueError:
        if not isinstance(value, str):
            raise
    try:
        return complex(value.replace(" ", ""))
    except ValueError:
        raise ValueError(f"cannot parse {value!r} as a complex number.") from None


def parse_schedule(value):
    """Strictly increasing list of positive integers, from a list or ``"4,8,16"``."""
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ValueError("schedule must be a non-empty list of positive integers.")
    out = []
    for v in value:
        n = parse_number(v.strip() if isinstance(v, str) else v)
        if n != int(n) or n < 1:
            raise ValueError(f"schedule entries must be positive integers, got {v!r}.")
        out.append(int(n))
    if out != sorted(set(out)):
        raise ValueError("schedule must be strictly increasing.")
    return tuple(out)


def _line_map(text):
    """Source line of every dotted path of a YAML document."""
    lines = {}

    def visit(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                lines[sub] = key.start_mark.line + 1
                visit(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                sub = f"{path}[{i}]"
                lines[sub] = value.start_mark.line + 1
                visit(value, sub)

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        visit(root, "")
    return lines


class Scenario:
    """Validated scenario document.

    Parameters
    ----------
    data : dict
        Parsed YAML document.
    lines : dict, optional
        Source line of each dotted path, used in error messages.
    source : str, optional
        File the document was read from.

    Every section is validated on construction; unknown keys are errors.
    The built objects are available through ``domain``, ``target``,
    ``map``, ``family``, ``config``, ``spec`` and ``potential``.
    """

    def __init__(self, data, lines=None, source=None):
        self._lines = dict(lines or {})
        self.source = source
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ScenarioError("the document must be a mapping of sections.", None, 1)
        self._check_keys(data, "", _SECTIONS)
        self._data = data
        default = os.path.splitext(os.path.basename(source))[0] if source else "scenario"
        self.name = str(data.get("name", default))

        self.domain = self._domain(data.get("domain", {}))
        self.target = self._target(data.get("target", {}))
        self.map = self._map(data["map"], "map") if "map" in data else None
        self.analysis = self._analysis(data.get("analysis", {}))
        self.family = self._family(data["family"]) if "family" in data else None
        if self.family is None and self.map is not None:
            self.family = fixed_family(self.map, self.analysis["schedule"] or (1,), "fixed map")
        elif self.family is not None and self.analysis["schedule"] is not None:
            self.family = self.family.with_schedule(self.analysis["schedule"])
        self.potential = self._potential(data["potential"]) if "potential" in data else None
        self.output = self._output(data.get("output", {}))
        logger.debug("scenario %s: sections %s", self.name, sorted(data))

    @classmethod
    def from_text(cls, text, source=None):
        try:
            data = yaml.safe_load(text)
            lines = _line_map(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ScenarioError(f"invalid YAML: {e}", None, mark.line + 1 if mark else None) from e
        return cls(data, lines, source)

    @classmethod
    def from_file(cls, path):
        with open(path, "r") as stream:
            text = stream.read()
        return cls.from_text(text, source=path)

    # ------------------------------------------------------------------
    # helpers

    def _error(self, message, path):
        line = self._lines.get(path)
        if line is None and path:
            line = self._lines.get(path.rsplit(".", 1)[0])
        return ScenarioError(message, path, line)

    def _check_keys(self, section, path, allowed):
        if not isinstance(section, dict):
            raise self._error("expected a mapping.", path)
        for key in section:
            if key not in allowed:
                sub = f"{path}.{key}" if path else str(key)
                raise self._error(f"unknown key {key!r}; expected one of {sorted(allowed)}.", sub)

    def _get(self, section, key, path, parse, default):
        if key not in section:
            return default
        sub = f"{path}.{key}"
        try:
            return parse(section[key])
        except (TypeError, ValueError) as e:
            raise self._error(str(e), sub) from None

    def _number(self, section, key, path, default):
        return self._get(section, key, path, parse_number, default)

    def _integer(self, section, key, path, default):
        def parse(v):
            x = parse_number(v)
            if x != int(x):
                raise ValueError(f"expected an integer, got {v!r}.")
            return int(x)

        return self._get(section, key, path, parse, default)

    def _coefficients(self, section, key, path, default):
        def parse(v):
            if not isinstance(v, (list, tuple)):
                v = [v]
            return [parse_complex(c) for c in v]

        return self._get(section, key, path, parse, default)

    def _build(self, builder, path):
        try:
            return builder()
        except (TypeError, ValueError) as e:
            raise self._error(str(e), path) from None

    # ------------------------------------------------------------------
    # sections

    def _domain(self, section):
        path = "domain"
        self._check_keys(section, path, ("type", "curvature", "amplitude", "inner", "outer"))
        kind = section.get("type", "round")
        curvature = self._number(section, "curvature", path, 1.0)
        if kind == "round":
            return self._build(lambda: RoundSphere(curvature), path)
        if kind == "euclidean":
            return EuclideanDomain()
        if kind == "conformal":
            amplitude = self._number(section, "amplitude", path, 0.3)
            inner = self._number(section, "inner", path, 0.5)
            outer = self._number(section, "outer", path, 0.9)
            if not 0 < inner < outer:
                raise self._error("require 0 < inner < outer.", path)
            return self._build(
                lambda: ConformalDomain(RoundSphere(curvature), truncated_linear_phi(amplitude, inner, outer)), path
            )
        raise self._error(f"unknown domain type {kind!r}; expected round, conformal or euclidean.", f"{path}.type")

    def _target(self, section):
        path = "target"
        self._check_keys(section, path, ("type", "curvature", "amplitude", "n", "c"))
        kind = section.get("type", "round")
        if kind == "round":
            curvature = self._number(section, "curvature", path, 1.0)
            return self._build(lambda: RoundTarget(curvature), path)
        if kind == "flat":
            return FlatTarget()
        if kind == "perturbed":
            amplitude = self._number(section, "amplitude", path, 0.3)
            return self._build(lambda: PerturbedRoundTarget(amplitude), path)
        if kind == "fubini-study":
            n = self._integer(section, "n", path, 2)
            c = self._number(section, "c", path, 1.0)
            return self._build(lambda: FubiniStudyTarget(n, c), path)
        raise self._error(
            f"unknown target type {kind!r}; expected round, flat, perturbed or fubini-study.", f"{path}.type"
        )

    def _map(self, section, path):
        self._check_keys(section, path, ("type", "numerator", "denominator", "components", "n", "base", "value"))
        kind = section.get("type", "rational")
        if kind == "rational":
            if "numerator" not in section:
                raise self._error("a rational map needs a numerator.", path)
            num = self._coefficients(section, "numerator", path, None)
            den = self._coefficients(section, "denominator", path, [1.0])
            return self._build(lambda: RationalMap(num, den), path)
        if kind == "projective":
            comps = section.get("components")
            if not isinstance(comps, list):
                raise self._error("components must be a list of coefficient lists.", f"{path}.components")
            comps = [self._coefficients({"c": c}, "c", f"{path}.components[{i}]", None) for i, c in enumerate(comps)]
            return self._build(lambda: ProjectiveCurve(comps), path)
        if kind == "veronese":
            n = self._integer(section, "n", path, 2)
            return self._build(lambda: veronese(n), path)
        if kind == "conjugate":
            if "base" not in section:
                raise self._error("a conjugate map needs a base map.", path)
            base = self._map(section["base"], f"{path}.base")
            return self._build(lambda: ConjugateMap(base), path)
        if kind == "constant":
            value = self._get(section, "value", path, parse_complex, 0.0)
            return constant_map(value)
        if kind == "bipolynomial":
            comps = section.get("components")
            if not isinstance(comps, list):
                raise self._error("components must be a list of [i, j, coefficient] term lists.", f"{path}.components")
            terms = []
            for i, comp in enumerate(comps):
                sub = f"{path}.components[{i}]"
                try:
                    terms.append({(int(t[0]), int(t[1])): parse_complex(t[2]) for t in comp})
                except (TypeError, ValueError, IndexError) as e:
                    raise self._error(f"terms must be [i, j, coefficient]: {e}", sub) from None
            return self._build(lambda: BipolynomialMap(terms), path)
        raise self._error(
            f"unknown map type {kind!r}; expected rational, projective, veronese, conjugate, constant or bipolynomial.",
            f"{path}.type",
        )

    def _family(self, section):
        path = "family"
        self._check_keys(section, path, ("name", "parameters", "schedule"))
        name = section.get("name")
        if name not in FAMILIES:
            raise self._error(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}.", f"{path}.name")
        params = section.get("parameters", {})
        self._check_keys(params, f"{path}.parameters", FAMILIES[name].__code__.co_varnames[
            : FAMILIES[name].__code__.co_argcount
        ])
        kwargs = {}
        for key, value in params.items():
            sub = f"{path}.parameters.{key}"
            if key == "schedule":
                raise self._error("set the schedule with family.schedule.", sub)
            try:
                x = parse_complex(value)
            except ValueError as e:
                raise self._error(str(e), sub) from None
            kwargs[key] = x.real if x.imag == 0 and key not in ("center", "a", "b", "value") else x
            if key == "power" and float(kwargs[key]).is_integer():
                kwargs[key] = int(kwargs[key])
        if "schedule" in section:
            kwargs["schedule"] = self._get(section, "schedule", path, parse_schedule, None)
        return self._build(lambda: FAMILIES[name](**kwargs), path)

    def _analysis(self, section):
        path = "analysis"
        self._check_keys(
            section,
            path,
            ("checks", "grid", "step", "schedule", "config", "conformal", "harmonic_tolerance", "dichotomy"),
        )
        checks = section.get("checks", list(VERIFY_CHECKS))
        if not isinstance(checks, list) or any(c not in VERIFY_CHECKS for c in checks):
            raise self._error(f"checks must be a list drawn from {list(VERIFY_CHECKS)}.", f"{path}.checks")
        out = {
            "checks": tuple(checks),
            "grid": self._integer(section, "grid", path, 256),
            "step": self._number(section, "step", path, 1.0 / 32),
            "schedule": self._get(section, "schedule", path, parse_schedule, None),
            "harmonic_tolerance": self._number(section, "harmonic_tolerance", path, 1e-8),
        }
        if out["step"] <= 0 or out["step"] > 0.5:
            raise self._error("step must lie in (0, 1/2].", f"{path}.step")

        conformal = section.get("conformal", {})
        self._check_keys(conformal, f"{path}.conformal", ("amplitude", "inner", "outer"))
        out["conformal"] = {
            k: self._number(conformal, k, f"{path}.conformal", d)
            for k, d in (("amplitude", 0.3), ("inner", 0.5), ("outer", 0.9))
        }

        config = section.get("config", {})
        allowed = BubbleConfig.__init__.__code__.co_varnames[1: BubbleConfig.__init__.__code__.co_argcount]
        self._check_keys(config, f"{path}.config", [k for k in allowed if k != "spec"])
        overrides = {}
        for key in config:
            if key in ("grid", "max_depth", "cone_samples"):
                overrides[key] = self._integer(config, key, f"{path}.config", None)
            else:
                overrides[key] = self._number(config, key, f"{path}.config", None)
        out["config"] = overrides

        dichotomy = section.get("dichotomy")
        if dichotomy is not None:
            sub = f"{path}.dichotomy"
            self._check_keys(dichotomy, sub, ("center", "radius", "p"))
            out["dichotomy"] = {
                "center": self._get(dichotomy, "center", sub, parse_complex, 0.0),
                "radius": self._number(dichotomy, "radius", sub, 0.5),
                "p": self._number(dichotomy, "p", sub, 2.0),
            }
        else:
            out["dichotomy"] = None
        return out

    def _phi(self, section, path):
        self._check_keys(section, path, ("type", "coefficient", "slope", "offset", "scale", "weight", "value"))
        kind = section.get("type", "quadratic")
        if kind == "quadratic":
            a = self._number(section, "coefficient", path, -0.5)
            b = self._number(section, "offset", path, 0.0)
            return lambda z: a * np.abs(z) ** 2 + b
        if kind == "harmonic":
            s = self._get(section, "slope", path, parse_complex, 1.0)
            b = self._number(section, "offset", path, 0.0)
            return lambda z: np.real(s * z) + b
        if kind == "constant":
            c = self._number(section, "value", path, 0.0)
            return lambda z: np.full(np.shape(z), c)
        if kind == "energy-log":
            lam = self._number(section, "scale", path, 0.5)
            t = self._number(section, "weight", path, 0.25)
            if lam <= 0:
                raise self._error("scale must be positive.", f"{path}.scale")
            return lambda z: t * np.log(4 * lam**2 / (lam**2 + np.abs(z) ** 2) ** 2)
        raise self._error(
            f"unknown function type {kind!r}; expected quadratic, harmonic, constant or energy-log.", f"{path}.type"
        )

    def _potential(self, section):
        path = "potential"
        self._check_keys(section, path, ("check", "p", "atoms", "phi", "point", "step"))
        atoms = []
        for i, atom in enumerate(section.get("atoms", [])):
            sub = f"{path}.atoms[{i}]"
            try:
                if not isinstance(atom, (list, tuple)) or len(atom) != 2:
                    raise ValueError("an atom is a [location, mass] pair.")
                atoms.append((parse_complex(atom[0]), parse_number(atom[1])))
            except ValueError as e:
                raise self._error(str(e), sub) from None
        default = "p1" if atoms else "key_lemma"
        check = section.get("check", default)
        if check not in ("p1", "p2", "key_lemma"):
            raise self._error(f"unknown check {check!r}; expected p1, p2 or key_lemma.", f"{path}.check")
        out = {
            "check": check,
            "p": self._number(section, "p", path, 1.0),
            "step": self._number(section, "step", path, 1.0 / 64),
            "point": self._get(section, "point", path, parse_complex, 0.0),
            "measure": self._build(lambda: DiskMeasure(atoms), f"{path}.atoms"),
            "phi": None,
        }
        if check == "p1" and not atoms:
            raise self._error("the p1 check needs atoms.", path)
        if check in ("p2", "key_lemma"):
            out["phi"] = self._phi(section.get("phi", {}), f"{path}.phi")
        return out

    def _output(self, section):
        path = "output"
        self._check_keys(section, path, ("dir", "prefix"))
        return {"dir": str(section.get("dir", ".")), "prefix": str(section.get("prefix", self.name))}

    # ------------------------------------------------------------------
    # built objects

    def spec(self, grid=None):
        """Quadrature of the scenario, ``grid`` overriding ``analysis.grid``."""
        n = self.analysis["grid"] if grid is None else grid
        return self._build(lambda: QuadratureSpec(n_points=n), "analysis.grid")

    def config(self, grid=None):
        """Bubble tree configuration with the scenario overrides."""
        return self._build(lambda: BubbleConfig(spec=self.spec(grid), **self.analysis["config"]), "analysis.config")

    def conformal_phi(self):
        c = self.analysis["conformal"]
        return truncated_linear_phi(c["amplitude"], c["inner"], c["outer"])

    def require(self, *names):
        """Raise unless the named sections are present."""
        for name in names:
            if getattr(self, name) is None:
                raise ScenarioError(f"this command needs a {name!r} section.", name, None)
        return self

    def describe(self):
        return {
            "name": self.name,
            "domain": self.domain.describe(),
            "target": self.target.describe(),
            "map": None if self.map is None else self.map.describe(),
            "family": None if self.family is None else self.family.describe(),
        }
