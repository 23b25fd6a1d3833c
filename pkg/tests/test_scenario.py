import numpy as np

from bubblelab.geometry import ConformalDomain, FubiniStudyTarget, RoundSphere, RoundTarget
from bubblelab.maps import ConjugateMap, RationalMap
from bubblelab.scenario import Scenario, ScenarioError, parse_complex, parse_number, parse_schedule


def test_parse_number():
    assert np.isclose(parse_number("4pi"), 4 * np.pi)
    assert np.isclose(parse_number("pi/2"), np.pi / 2)
    assert np.isclose(parse_number("2*pi"), 2 * np.pi)
    assert np.isclose(parse_number("1/64"), 1.0 / 64)
    assert np.isclose(parse_number("-0.5"), -0.5)
    assert parse_number(3) == 3.0

    for value in ["pie", "1/0", True, None, ""]:
        try:
            parse_number(value)
        except ValueError:
            pass
        else:
            raise AssertionError


def test_parse_complex_and_schedule():
    assert parse_complex([0.3, 0.2]) == 0.3 + 0.2j
    assert parse_complex("0.3+0.2j") == 0.3 + 0.2j
    assert parse_complex(1) == 1.0
    assert parse_schedule("4, 8,16") == (4, 8, 16)
    assert parse_schedule([4, 8]) == (4, 8)

    for value in [[], "8,4", [4, 4], [0, 1], [1.5]]:
        try:
            parse_schedule(value)
        except ValueError:
            pass
        else:
            raise AssertionError


def test_defaults():
    s = Scenario.from_text("map:\n  numerator: [0, 0, 1]\n")
    assert s.name == "scenario"
    assert isinstance(s.domain, RoundSphere)
    assert isinstance(s.target, RoundTarget)
    assert isinstance(s.map, RationalMap) and s.map.degree == 2
    assert s.family.schedule == (1,)
    assert s.analysis["checks"] == ("erels", "pointwise", "bochner", "theorem1", "energy_bounds", "conformal")
    assert s.spec().n_points == 256
    assert s.spec(64).n_points == 64
    assert s.potential is None


def test_full_scenario():
    text = """
name: veronese-fs
domain:
  type: conformal
  amplitude: 0.2
target:
  type: fubini-study
  n: 2
  c: 2.0
map:
  type: conjugate
  base:
    numerator: [0, 1]
family:
  name: shrinking-identity
  parameters:
    scale: 0.5
    power: 2
analysis:
  schedule: 4,8
  config:
    C_R: pi/4
    max_depth: 2
output:
  dir: out
"""
    s = Scenario.from_text(text, source="veronese-fs.yaml")
    assert s.name == "veronese-fs"
    assert isinstance(s.domain, ConformalDomain)
    assert isinstance(s.target, FubiniStudyTarget)
    assert isinstance(s.map, ConjugateMap)
    assert s.family.schedule == (4, 8)
    assert np.isclose(s.family.parameter("lambda", 4), 0.5 / 16)
    config = s.config()
    assert np.isclose(config.C_R, np.pi / 4)
    assert config.max_depth == 2
    assert s.output == {"dir": "out", "prefix": "veronese-fs"}
    assert s.describe()["target"]["n"] == 2


def test_potential_section():
    s = Scenario.from_text("potential:\n  p: 2\n  atoms:\n    - [0.0, pi]\n    - [[0.3, 0.1], 1.0]\n")
    assert s.potential["check"] == "p1"
    assert np.isclose(s.potential["measure"].mass(), np.pi + 1.0)

    s = Scenario.from_text("potential:\n  phi:\n    type: harmonic\n    slope: 1\n")
    assert s.potential["check"] == "key_lemma"
    assert np.allclose(s.potential["phi"](np.array([0.5 + 0.5j])), 0.5)


def test_errors_carry_path_and_line():
    text = "map:\n  numerator: [0, 1]\ntarget:\n  type: hyperbolic\n"
    try:
        Scenario.from_text(text)
    except ScenarioError as e:
        assert e.path == "target.type"
        assert e.line == 4
        assert "hyperbolic" in str(e)
    else:
        raise AssertionError

    for text in [
        "unknown: 1\n",
        "map:\n  numerator: [0, 1]\n  colour: red\n",
        "map:\n  denominator: [1]\n",
        "map:\n  numerator: [0, 1]\n  denominator: [0, 1]\n",
        "family:\n  name: three-bubble\n",
        "family:\n  name: two-bubble\n  parameters:\n    a: 0\n    b: 0\n",
        "analysis:\n  step: 0.75\n",
        "analysis:\n  checks: [pointwise, magic]\n",
        "potential:\n  check: p1\n",
        "potential:\n  atoms:\n    - [0.0]\n",
        "map: [1, 2\n",
        "- 1\n- 2\n",
    ]:
        try:
            Scenario.from_text(text)
        except ScenarioError:
            pass
        else:
            raise AssertionError(text)


def test_require():
    s = Scenario.from_text("map:\n  numerator: [0, 1]\n")
    assert s.require("map", "family") is s
    try:
        s.require("potential")
    except ScenarioError as e:
        assert e.path == "potential"
    else:
        raise AssertionError
