"""quadgrad: a numerical laboratory for elliptic Dirichlet problems with
quadratic gradient terms

    -Lap(u) + g(x, u) |grad u|^2 = lambda f(u) + t u^sigma,  u = 0 on the boundary,

covering singular coefficients g ~ mu(x)/(s+delta)^gamma, the change of
variables that removes the gradient term, parameter sweeps in lambda and
t, and the structural checks (exponent thresholds, comparison, identity
defects, degeneration probes) that classify when positive solutions
exist.
"""

from .model import (DomainSpec, MuFieldSpec, NonlinearitySpec, GradientCoefSpec,
                    ProblemSpec, SourceSpec, TableFunction, Thresholds,
                    two_star, thresholds, validate_spec, eval_f, eval_g, eval_sg,
                    eval_mu, eval_source, SpecError, DomainError, TableRangeError)
from .mesh import (RadialMesh, Grid2D, DiscreteField, make_mesh, radial_laplacian,
                   gradient_sq, residual_quasilinear, residual_frozen)
from .linalg import (BandedMatrix, tridiag_solve, banded_solve, krylov_solve,
                     principal_eigenpair, EigenPair, SingularSystemError,
                     KrylovError, laplacian_matrix)
from .solve import (SolverConfig, SolveReport, newton_solve, fixed_point_solve,
                    freeze_solve, continuation_lambda, continuation_t,
                    SweepTable, SweepRow, initial_guess, principal_eigen_cached)
from .transforms import (psi_forward, psi_inverse, psi_derivative, semilinearize,
                         power_transform_check, gamma_transform, truncate_at_s0,
                         truncate_at_delta, blowup_rescale, TransformedProblem)
from .checks import (check_psi_decreasing, comparison_check, pohozaev_defect,
                     supercritical_witness, holder_quotient,
                     apriori_scaled_sweep, nonexistence_probe, CheckVerdict)

__version__ = "0.1.0"
