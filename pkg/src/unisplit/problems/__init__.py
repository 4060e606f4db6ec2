"""Builders that turn physical problem descriptions into canonical split systems."""
from .catalog import PRESETS, TABLE_PROBLEMS, build_preset
from .conditioning import estimate_condition_number, extreme_singular_values, solver_inverse, split_inverse
from .config import ConfigError, build_from_config, load_config, load_problem, read_sidecar, write_sidecar
from .diffusion import DiffusionSpec, anisotropic_tensor, build_diffusion_split, slab_profile
from .helmholtz import HelmholtzSpec, build_helmholtz_split, point_source_green_1d
from .pantograph import (PantographSpec, build_pantograph_split, derivative_matrix, dilation_matrix, pantograph_raw,
                         reference_solution)
from .schrodinger import (SchrodingerSpec, build_schrodinger_split, condition_study, double_ring_potential,
                          schrodinger_raw)
