"""Divergence-free ReLU^k finite neuron spaces: fitting, Stokes solves and rate sweeps."""
__version__ = "0.1.0"

from .assembly import (RowBlockSpec, SolveReport, assemble_compressed, assemble_normal,
                       assemble_tall, condition_number, solve_lstsq_svd, solve_normal,
                       solve_system)
from .config import ExperimentConfig
from .errors import (AssemblyError, DegenerateConfigurationError, DivisionGuardError,
                     InvalidArgumentError, QuadratureEvaluationError, ResourceBudgetError,
                     SolverError)
from .features import (DivFreeBasis, eval_divfree_basis, eval_divfree_basis_jacobian,
                       eval_scalar_feature, field_jacobians, field_values)
from .metrics import (ErrorRecord, FittedField, divergence_audit, empirical_rate,
                      error_norms, global_rate, theoretical_rate)
from .problems import (BoundaryData, SampledField, VectorField, build_driver, build_problem,
                       lid_boundary_data, target_l2_2d, target_l2_3d, target_stokes_2d,
                       target_stokes_3d)
from .quadrature import (QuadratureRule, build_boundary_rule, build_volume_rule,
                         gauss_legendre_1d, integrate_chunked)
from .sphere import (ParamSet, estimate_mesh_norm, filter_active_neurons,
                     refine_quasi_uniform, riesz_energy, sample_gaussian_sphere,
                     separation_distance, uniformity_diagnostics)
from .sweep import (ExperimentReport, export_quadrature_nodes, field_dump, generate_params,
                    run_sweep)
