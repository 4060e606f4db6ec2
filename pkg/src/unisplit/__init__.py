"""Matrix-free split preconditioning for accretive linear systems."""
from .operators import (CapabilityError, ComplexVector, DenseOperator, LinearMap, accretivity_lower_bound,
                        dense_inverse, operator_norm_estimate)
from .splitting import (Circle, PreconditionedSystem, ScaleRecord, SplitSystem, antisymmetrize,
                        build_preconditioned, compute_scalar_scale, equilibrate, smallest_enclosing_circle,
                        split_from_dense)
from .solvers import (ShiftConfig, SolverConfig, SolverReport, bicgstab_solve, classify_termination,
                      fixed_point_solve, gmres_solve, parse_algorithm, shift_split_solve, solve)

__version__ = "0.1.0"
