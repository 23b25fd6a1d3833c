"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import argparse
import logging
import os
import sys
import time

import numpy as np

from .bubbletree import BubbleTreeBuilder, curvature_dichotomy
from .densities import (
    _hdot,
    _sup,
    bochner_residual,
    density_field,
    density_report,
    energy_relations,
    harmonic_residual,
    sample_jets,
)
from .geometry import NORTH, ChartPoint, chart_lattice
from .integration import ConformalInvarianceCheck, EnergyBoundsCheck, Theorem1Check
from .maps import ConjugateMap, RationalMap
from .potential import KeyLemmaCheck, P1Check, P2Check
from .scenario import Scenario, ScenarioError, parse_schedule
from .utils import make_dot, plot_density_field, plot_mass_flow, write_csv, write_json

__all__ = ["main", "build_parser", "cmd_density", "cmd_verify", "cmd_bubble", "cmd_riesz"]

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

_SEAM_TOLERANCE = 1e-12
_POINTWISE_SLACK = 1e-9
_ERELS_TOLERANCE = 1e-9


def _outputs(scenario, args, command):
    directory = args.out if args.out is not None else scenario.output["dir"]
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, f"{scenario.output['prefix']}_{command}")


def _lattice(step):
    z = chart_lattice(step, 1.0, margin=0)
    return z[np.abs(z) <= 1.0]


def _summary(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return {"mean": None, "min": None, "max": None}
    return {"mean": float(np.mean(finite)), "min": float(np.min(finite)), "max": float(np.max(finite))}


def cmd_density(scenario, args):
    """Density field on both chart lattices and its summary statistics.

    ``--grid N`` sets the lattice step to ``1/N``.
    """
    scenario.require("map")
    step = 1.0 / args.grid if args.grid else scenario.analysis["step"]
    field = density_field(scenario.map, scenario.domain, scenario.target, step)
    base = _outputs(scenario, args, "density")
    write_csv(field, base + ".csv")

    radius = np.hypot(field["re"], field["im"])
    seam = field[(field["chart"] == NORTH) & (np.abs(radius - 1.0) <= _SEAM_TOLERANCE)]
    summary = {"scenario": scenario.describe(), "step": step, "n_points": int(len(field)), "csv": base + ".csv"}
    for column in ("e_holo", "e_anti", "q_holo", "q_anti", "q_plus", "sigma"):
        summary[column] = _summary(field[column])
        summary[f"{column}_mean"] = summary[column]["mean"]
    summary["seam"] = {"n_points": int(len(seam)), "e_holo": _summary(seam["e_holo"]), "e_anti": _summary(seam["e_anti"])}
    finite = bool(np.all(np.isfinite(field[["e_holo", "e_anti", "q_holo", "q_anti", "q_plus"]].to_numpy())))
    summary["passed"] = finite
    if not finite:
        logger.warning("density field has non-finite samples")

    if args.plot:
        fig = plot_density_field(field, "e_holo")
        fig.savefig(base + ".png")
    logger.info("density: %d samples written to %s.csv", len(field), base)
    return summary, finite


def _harmonic_guard(m, domain, target, step, tolerance):
    """Relative tension of the map on the chart lattices."""
    worst, scale = 0.0, 0.0
    for chart in m.charts:
        j = m.jets(chart, _lattice(step), order=2)
        tension = harmonic_residual(j, target)
        H = target.metric(j.u, j.target_chart)
        speed = np.sqrt(np.real(_hdot(H, j.u_z, j.u_z)) + np.real(_hdot(H, j.u_zb, j.u_zb)))
        worst = max(worst, _sup(tension))
        scale = max(scale, _sup(speed))
    relative = worst / scale if scale > 0 else 0.0
    return {
        "residual": worst,
        "relative_residual": relative,
        "tolerance": tolerance,
        "harmonic": relative <= tolerance,
        "constant": scale == 0.0,
    }


def _erels(m, domain, target, step):
    worst_energy, worst_form, n_points = 0.0, 0.0, 0
    for chart in m.charts:
        energy, form, scale = energy_relations(m.jets(chart, _lattice(step), order=1), domain, target)
        scale = max(scale, 1e-300)
        worst_energy = max(worst_energy, _sup(energy) / scale)
        worst_form = max(worst_form, _sup(form) / scale)
        n_points += int(np.size(energy))
    out = {
        "check": "erels",
        "n_points": n_points,
        "energy_relative": worst_energy,
        "form_relative": worst_form,
        "tolerance": _ERELS_TOLERANCE,
    }
    out["passed"] = worst_energy <= _ERELS_TOLERANCE and worst_form <= _ERELS_TOLERANCE
    return out


def _pointwise(m, domain, target, step):
    violations, sigma_violations, n_points = 0, 0, 0
    sigma_min, sigma_max = np.inf, -np.inf
    order = 2 if target.dim > 1 else 1
    for chart in m.charts:
        report = density_report(sample_jets(m, chart, _lattice(step), order), domain, target)
        scale = max(float(np.max(report.e)), 1.0)
        for margin in report.cs_margin:
            violations += int(np.sum(margin < -_POINTWISE_SLACK * scale))
        n_points += int(np.size(report.e))
        if report.sigma is not None:
            s = report.sigma[np.isfinite(report.sigma)]
            if s.size:
                sigma_min, sigma_max = min(sigma_min, float(np.min(s))), max(sigma_max, float(np.max(s)))
                sigma_violations += int(np.sum((s < -_POINTWISE_SLACK) | (s > 0.5 + _POINTWISE_SLACK)))
    out = {
        "check": "pointwise",
        "n_points": n_points,
        "cauchy_schwarz_violations": violations,
        "sigma_violations": sigma_violations,
        "sigma_min": sigma_min if np.isfinite(sigma_min) else None,
        "sigma_max": sigma_max if np.isfinite(sigma_max) else None,
        "slack": _POINTWISE_SLACK,
    }
    out["passed"] = violations == 0 and sigma_violations == 0
    return out


def _bochner(m, domain, target, step):
    fields = bochner_residual(m, domain, target, step, chart=NORTH)
    out = {"check": "bochner", "step": step, "observed_order": fields.observed_order, "flags": list(fields.flags)}
    ok = True
    for part in ("holo", "anti"):
        residual = fields.sup(f"residual_e_{part}")
        error = fields.sup(f"error_e_{part}")
        allowed = 2.0 * error + 1e-8
        out[f"residual_e_{part}"] = residual
        out[f"error_e_{part}"] = error
        out[f"beta_{part}_sq"] = fields.sup(f"beta_{part}_sq")
        ok &= residual <= allowed
    out["alpha_nonnegative"] = fields.alpha_nonnegative()
    out["passed"] = bool(ok and out["alpha_nonnegative"])
    return out


def _theorem1_applicable(m, target):
    base = m.base if isinstance(m, ConjugateMap) else m
    if not isinstance(base, RationalMap) or target.dim != 1:
        return "requires a holomorphic or antiholomorphic rational map into a curve target"
    if base.degree < 1:
        return "constant map"
    return None


def cmd_verify(scenario, args):
    """Pointwise identities and integral bounds of one map.

    ``--grid N`` sets the number of radial quadrature nodes; the lattice
    checks use ``analysis.step``.
    """
    scenario.require("map")
    m, domain, target = scenario.map, scenario.domain, scenario.target
    step = scenario.analysis["step"]
    spec = scenario.spec(args.grid)
    report = {"scenario": scenario.describe(), "grid": spec.describe(), "checks": {}}

    guard = _harmonic_guard(m, domain, target, step, scenario.analysis["harmonic_tolerance"])
    report["harmonic"] = guard
    if not guard["harmonic"]:
        guard["status"] = "not harmonic"
        guard["informational"] = True
        logger.info("map is not harmonic (relative tension %.3e); identity checks skipped", guard["relative_residual"])
        report["passed"] = True
        return report, True

    checks = report["checks"]
    for name in scenario.analysis["checks"]:
        logger.debug("verify: running %s", name)
        if name == "erels":
            checks[name] = _erels(m, domain, target, step)
        elif name == "pointwise":
            checks[name] = _pointwise(m, domain, target, step)
        elif name == "bochner":
            checks[name] = _bochner(m, domain, target, step)
        elif name == "theorem1":
            reason = _theorem1_applicable(m, target)
            if reason is not None:
                checks[name] = {"check": name, "skipped": reason}
                continue
            checks[name] = Theorem1Check(spec).fit(m, domain, target).to_dict()
        elif name == "energy_bounds":
            if guard["constant"]:
                checks[name] = {"check": name, "skipped": "constant map"}
                continue
            checks[name] = EnergyBoundsCheck(spec).fit(m, domain, target).to_dict()
        elif name == "conformal":
            checks[name] = ConformalInvarianceCheck(scenario.conformal_phi(), spec).fit(m, domain, target).to_dict()

    passed = all(c.get("passed", True) for c in checks.values())
    report["passed"] = passed
    return report, passed


def cmd_bubble(scenario, args):
    """Bubble tree of a family, its per-index partitions and optional figures.

    ``--grid N`` sets the number of radial quadrature nodes.
    """
    scenario.require("family")
    family = scenario.family
    config = scenario.config(args.grid)
    builder = BubbleTreeBuilder(config).fit(family, scenario.domain, scenario.target)
    tree = builder.tree_

    base = _outputs(scenario, args, "bubble")
    frame = tree.partition_frame()
    write_csv(frame, base + ".csv")
    report = {"scenario": scenario.describe(), "tree": tree.to_dict(), "passed": builder.passed_, "csv": base + ".csv"}

    dichotomy = scenario.analysis["dichotomy"]
    if dichotomy is not None:
        center = ChartPoint(NORTH, dichotomy["center"])
        d = curvature_dichotomy(
            family, scenario.domain, scenario.target, center, dichotomy["radius"], dichotomy["p"], config
        )
        report["dichotomy"] = d.to_dict()

    if args.plot:
        make_dot(tree).save(base + ".gv")
        plot_mass_flow(frame).savefig(base + ".png")
    return report, builder.passed_


def cmd_riesz(scenario, args):
    """Potential estimates on the unit disk.

    ``--grid N`` sets the lattice step to ``1/N``.
    """
    scenario.require("potential")
    pot = scenario.potential
    step = 1.0 / args.grid if args.grid else pot["step"]
    if pot["check"] == "p1":
        check = P1Check(pot["p"]).fit(pot["measure"])
    elif pot["check"] == "p2":
        check = P2Check(step).fit(pot["phi"], pot["point"])
    else:
        check = KeyLemmaCheck(pot["p"], step).fit(pot["phi"])
    result = check.report_
    report = {
        "check": pot["check"],
        "measure": pot["measure"].describe(),
        "report": result.to_dict(),
        "holds": result.holds,
        "passed": check.passed_,
    }
    return report, check.passed_


COMMANDS = {"density": cmd_density, "verify": cmd_verify, "bubble": cmd_bubble, "riesz": cmd_riesz}


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _schedule(text):
    try:
        return parse_schedule(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bubblelab",
        description="Curvature densities, quadrature checks and bubble trees of harmonic maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "density": "write the density field of a map (CSV) and its summary (JSON)",
        "verify": "check pointwise identities and integral bounds of a map",
        "bubble": "build the bubble tree of a family (JSON) with per-index partitions (CSV)",
        "riesz": "check logarithmic potential estimates on the unit disk",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("scenario", help="scenario file (YAML)")
        p.add_argument(
            "--grid",
            type=_positive_int,
            default=None,
            help="radial quadrature nodes (verify, bubble) or inverse lattice step (density, riesz); "
            "default: the scenario's analysis.grid (256) or step (1/32, potential 1/64)",
        )
        p.add_argument(
            "--schedule",
            type=_schedule,
            default=None,
            help="comma separated family indices, e.g. 4,8,16; default: the scenario's schedule",
        )
        p.add_argument("--out", default=None, help="output directory; default: the scenario's output.dir (.)")
        p.add_argument("--plot", action="store_true", help="also write figures")
        p.add_argument("--timing", action="store_true", help="write the runtime into the JSON report")
        verbosity = p.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
        p.set_defaults(func=COMMANDS[name])
    return parser


def main(argv=None):
    """Run a command and return its exit code.

    0 when every check passed, 1 when a check failed, 2 for invalid input
    and 3 for numerical failures.
    """
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format="%(name)s:%(levelname)s:%(message)s", level=level)
    logging.captureWarnings(True)

    start = time.perf_counter()
    try:
        scenario = Scenario.from_file(args.scenario)
        if args.schedule is not None and scenario.family is not None:
            scenario.family = scenario.family.with_schedule(args.schedule)
        report, passed = args.func(scenario, args)
    except np.linalg.LinAlgError as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    except ScenarioError as e:
        logger.error("invalid scenario: %s", e)
        return EXIT_INVALID
    except (ValueError, TypeError, OSError) as e:
        logger.error("invalid input: %s", e)
        return EXIT_INVALID
    except (FloatingPointError, RuntimeError) as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    elapsed = time.perf_counter() - start
    logger.info("%s finished in %.2f s", args.command, elapsed)

    path = _outputs(scenario, args, args.command) + ".json"
    text = write_json(report, path, elapsed if args.timing else None)
    sys.stdout.write(text + "\n")
    return EXIT_PASS if passed else EXIT_FAIL


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
