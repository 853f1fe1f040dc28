"""
ph3lab - Core Lab Module

This package contains the numerical laboratory for conservative partially
hyperbolic maps of the 3-torus:
- torus_maps / catalog: map families, Jacobians, linearizations
- cocycle: Oseledec splitting and Lyapunov exponents
- leaves: strong and center leaves in the universal cover
- density: conditional densities, foliated boxes, U.B.D. constants
- holonomy: center and unstable holonomies
- periodic: periodic points and periodic data
- experiments: end-to-end experiment drivers
"""

from ph3lab.torus_maps import (
    IntegerMatrix3,
    ShearStep,
    TorusMapSpec,
    LinearData,
    flip_conjugate,
    verify_partial_hyperbolicity,
)
from ph3lab.catalog import CATALOG, builtin_map, builtin_names
from ph3lab.specfile import dump_map_spec, load_map_spec
from ph3lab.cocycle import SplittingFrame, LyapunovReport, lyapunov_spectrum, oseledec_splitting, directional_exponent
from ph3lab.leaves import LeafSegment, trace_strong_leaf, trace_center_leaf, quasi_isometry_constant
from ph3lab.density import DensityProfile, UbdReport, delta, density_profile, ubd_constant
from ph3lab.holonomy import HolonomyReport, center_holonomy, unstable_holonomy
from ph3lab.periodic import PeriodicOrbit, PeriodicDataReport, find_periodic_points, periodic_data, periodic_data_constancy
from ph3lab.experiments import ExperimentRunner, ExperimentResult, RigidityReport, SweepReport
from ph3lab.utils import ReportStore, load_config
from ph3lab.exceptions import (
    LabError,
    ConfigurationError,
    ManifestError,
    SpecFileError,
    NotPartiallyHyperbolicLinearization,
    VerificationFailed,
    DegenerateSplitting,
    NewtonDiverged,
    DegenerateJacobian,
    ComplexPair,
)

__all__ = [
    "IntegerMatrix3",
    "ShearStep",
    "TorusMapSpec",
    "LinearData",
    "flip_conjugate",
    "verify_partial_hyperbolicity",
    "CATALOG",
    "builtin_map",
    "builtin_names",
    "dump_map_spec",
    "load_map_spec",
    "SplittingFrame",
    "LyapunovReport",
    "lyapunov_spectrum",
    "oseledec_splitting",
    "directional_exponent",
    "LeafSegment",
    "trace_strong_leaf",
    "trace_center_leaf",
    "quasi_isometry_constant",
    "DensityProfile",
    "UbdReport",
    "delta",
    "density_profile",
    "ubd_constant",
    "HolonomyReport",
    "center_holonomy",
    "unstable_holonomy",
    "PeriodicOrbit",
    "PeriodicDataReport",
    "find_periodic_points",
    "periodic_data",
    "periodic_data_constancy",
    "ExperimentRunner",
    "ExperimentResult",
    "RigidityReport",
    "SweepReport",
    "ReportStore",
    "load_config",
    "LabError",
    "ConfigurationError",
    "ManifestError",
    "SpecFileError",
    "NotPartiallyHyperbolicLinearization",
    "VerificationFailed",
    "DegenerateSplitting",
    "NewtonDiverged",
    "DegenerateJacobian",
    "ComplexPair",
]
