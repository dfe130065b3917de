"""Discrete capacity and modulus duality on toroidal complexes."""

__version__ = "0.1.0"

from .capacity import (CapacityReport, capacity_energy, capacity_gradient, minimal_upper_gradient,
                       solve_capacity, variational_check)
from .complex import (Density, ToroidalComplex, ValidationReport, build_ladder, build_ring,
                      build_solid_torus, load_complex, save_complex, scale_metric, validate)
from .covering import (CircleMap, LiftedMap, PeriodicCover, degree, edge_increments, lift, project,
                       unroll, winding_number)
from .errors import (DegenerateComplexError, DegreeError, EpsTooLargeError, FaceInconsistentError,
                     InvalidComplexError, NoAdmissibleError, NotConvergedError, NotEdgeFineError,
                     NotSeparatingError, ToromodError)
from .harness import DualityRow, coarea_check, isoperimetric_check, run_duality, sweep
from .modulus import ConstraintOracle, Member, SolveReport, brute_force_modulus, solve_modulus
from .paths import WindingCycle, WindingCycleOracle, path_modulus, winding_cycle_oracle
from .surfaces import (SeparatingCut, WindingCutOracle, is_separating, level_cut, surface_modulus,
                       surface_to_degree_one_map, winding_cut_oracle)

__all__ = [
    "brute_force_modulus",
    "build_ladder",
    "build_ring",
    "build_solid_torus",
    "capacity_energy",
    "capacity_gradient",
    "CapacityReport",
    "CircleMap",
    "coarea_check",
    "ConstraintOracle",
    "DegenerateComplexError",
    "degree",
    "DegreeError",
    "Density",
    "DualityRow",
    "edge_increments",
    "EpsTooLargeError",
    "FaceInconsistentError",
    "InvalidComplexError",
    "is_separating",
    "isoperimetric_check",
    "level_cut",
    "lift",
    "LiftedMap",
    "load_complex",
    "Member",
    "minimal_upper_gradient",
    "NoAdmissibleError",
    "NotConvergedError",
    "NotEdgeFineError",
    "NotSeparatingError",
    "path_modulus",
    "PeriodicCover",
    "project",
    "run_duality",
    "save_complex",
    "scale_metric",
    "SeparatingCut",
    "solve_capacity",
    "solve_modulus",
    "SolveReport",
    "surface_modulus",
    "surface_to_degree_one_map",
    "sweep",
    "ToroidalComplex",
    "ToromodError",
    "unroll",
    "validate",
    "ValidationReport",
    "variational_check",
    "winding_cut_oracle",
    "winding_cycle_oracle",
    "winding_number",
    "WindingCutOracle",
    "WindingCycle",
    "WindingCycleOracle",
]
