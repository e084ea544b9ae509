"""Weighted L^p Minkowski problems for rotationally invariant measures."""

from .errors import (
    DegenerateBodyError, InfiniteMassError, MinkowskiError, OutOfRangeError, PreconditionError,
    SchemaError, UnboundedBodyError,
)
from .geometry import (
    DirectionSet, Polytope, SphericalMeasure, SupportVector, hausdorff_distance, hausdorff_to_ball,
    lp_combine, polytope_from_points, radial_eval, random_body, support_eval, wulff_shape,
)
from .inequalities import (
    IsoProfile, check_subspace_concentration, concavity_probe, hemisphere_constant, iso_eval,
    lp_iso_bound, lp_iso_function, uniqueness_gap,
)
from .io import emit_geometry, load_problem, parse_problem, read_geometry_csv
from .measures import (
    WeightedSurfaceMeasure, body_mass, cone_measure, lp_mixed_measure, lp_surface_measure,
    mass_first_variation, mixed_measure, weighted_facet_area, weighted_facet_areas, weighted_perimeter,
)
from .monge_ampere import ma_multistart, ma_spec, solve_ma_circle
from .solvers import (
    ProblemSpec, SolveReport, SolverConfig, kkt_report, objective_eval, precheck, solve, solve_entropy,
    solve_free, solve_isotropic, solve_pinned, solve_small_mass_dual,
)
from .weights import (
    WeightProfile, check_mn_membership, check_property_D, constant_solutions, inverse_radial_mass,
    isotropic_analyze, radial_mass, total_mass,
)

__all__ = [name for name, value in list(globals().items())
           if not name.startswith("_") and not isinstance(value, type(errors))]
