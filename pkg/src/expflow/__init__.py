"""Numerical companion for expansive flows on non-compact spaces.

Fixtures, scale functions, separated/spanning set counts, entropy and e*
estimates, expansivity falsifiers and periodic-orbit censuses.
"""

__version__ = "0.1.0"

from .core import (Conjugacy, DomainEscape, Flow, MetricSpace, SphereSpace, TimeScaledFlow, conjugate_flow,
                   evaluate, group_law_residual)
from .entropy import (EntropyEstimator, EntropyReport, estimate_e_star, estimate_entropy_compact,
                      verify_identity)
from .expansivity import (ExpansivityFalsifier, ExpansivityVerdict, Reparam, SearchBudget, Witness,
                          certify_example_jim, check_singularities_isolated, falsify, recheck_witness)
from .fixtures import list_fixtures, make_fixture
from .periodic import (OrbitCensus, census_window, check_growth_bound, growth_rate, necklace_counts,
                       orbit_census)
from .scales import (ScaleFn, ScaleRefiner, check_ll, constant, dowker_interpolate, jim_scale, refine_scale,
                     validate_scale)
from .separation import (CompactSample, SeparationEngine, SeparationEstimator, SeparationReport, beta,
                         make_compact, max_separated_set, min_spanning_set, separation_report)
from .symbolic import SFT, SuspensionFlow, SymbolicPoint, cylinder_sample

__all__ = [
    "CompactSample", "Conjugacy", "DomainEscape", "EntropyEstimator", "EntropyReport", "ExpansivityFalsifier",
    "ExpansivityVerdict", "Flow", "MetricSpace", "OrbitCensus", "Reparam", "SFT", "ScaleFn", "ScaleRefiner",
    "SearchBudget", "SeparationEngine", "SeparationEstimator", "SeparationReport", "SphereSpace",
    "SuspensionFlow", "SymbolicPoint", "TimeScaledFlow", "Witness", "beta", "census_window",
    "certify_example_jim", "check_growth_bound", "check_ll", "check_singularities_isolated", "conjugate_flow",
    "constant", "cylinder_sample", "dowker_interpolate", "estimate_e_star", "estimate_entropy_compact",
    "evaluate", "falsify", "group_law_residual", "growth_rate", "jim_scale", "list_fixtures", "make_compact",
    "make_fixture", "max_separated_set", "min_spanning_set", "necklace_counts", "orbit_census",
    "recheck_witness", "refine_scale", "separation_report", "validate_scale", "verify_identity",
]
