"""
The bubblelab module includes a numerical laboratory for harmonic maps.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

from .bubbletree import BubbleConfig, BubbleTree, BubbleTreeBuilder, build_tree, curvature_dichotomy
from .densities import DensityReport, bochner_residual, density_field, density_report
from .geometry import (
    ChartPoint,
    ConformalDomain,
    EuclideanDomain,
    FlatTarget,
    FubiniStudyTarget,
    PerturbedRoundTarget,
    RoundSphere,
    RoundTarget,
)
from .integration import (
    ConformalInvarianceCheck,
    EnergyBoundsCheck,
    QuadratureSpec,
    Theorem1Check,
    atom_fit,
    totals,
)
from .maps import FAMILIES, MapFamily, ProjectiveCurve, RationalMap, veronese
from .potential import DiskMeasure, KeyLemmaCheck, P1Check, P2Check, PotentialReport
from .scenario import Scenario, ScenarioError

__all__ = [
    "ChartPoint",
    "RoundSphere",
    "EuclideanDomain",
    "ConformalDomain",
    "RoundTarget",
    "FlatTarget",
    "PerturbedRoundTarget",
    "FubiniStudyTarget",
    "RationalMap",
    "ProjectiveCurve",
    "MapFamily",
    "FAMILIES",
    "veronese",
    "DensityReport",
    "density_report",
    "density_field",
    "bochner_residual",
    "QuadratureSpec",
    "totals",
    "atom_fit",
    "Theorem1Check",
    "EnergyBoundsCheck",
    "ConformalInvarianceCheck",
    "DiskMeasure",
    "PotentialReport",
    "P1Check",
    "P2Check",
    "KeyLemmaCheck",
    "BubbleConfig",
    "BubbleTree",
    "BubbleTreeBuilder",
    "build_tree",
    "curvature_dichotomy",
    "Scenario",
    "ScenarioError",
]

__version__ = "1.0.0"
