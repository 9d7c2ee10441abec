"""Adaptive Morley finite elements for clustered plate-vibration eigenvalues.

The package computes eigenvalue windows of the fourth-order plate operator
on polygonal domains with clamped, simply supported and free boundary
parts, runs a residual-driven adaptive bisection loop, and verifies the
structural identities behind the method: the Hessian mean-projection
property of the nonconforming interpolation, the discrete splitting of
piecewise constant symmetric tensor fields, two-sided eigenvalue bounds
and principal subspace angles.
"""

from .afem import (AfemConfig, AfemTrace, convergence_rate,
                   reference_eigenvalues, run_afem, uniform_trace)
from .assembly import (SymSparseMatrix, assemble_mass, assemble_stiffness,
                       osc_k, project_pk, solve_linear)
from .eigen import (ClusterSolution, SeparationReport, lower_bound,
                    principal_angle, separation, solve_gevp)
from .estimator import EstimatorField, MarkSet, dorfler_mark, estimate
from .helmholtz import XSpace, build_xspace, decompose, dimension_audit
from .mesh import (BoundaryPart, Triangulation, build_mesh, load_mesh,
                   lshape_mesh, preset_mesh, refine_nvb, save_mesh,
                   square_mesh, uniform_refine)
from .space import (BrokenFunction, MorleySpace, build_space, dof_functional,
                    evaluate_broken, morley_interpolate, prolong_to_fine)

__version__ = "0.1.0"
