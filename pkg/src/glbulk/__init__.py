"""Bulk-energy hierarchy of the Ginzburg-Landau model on a magnetic square.

Library layers: discrete geometry and link phases (grid), the covariant
Laplacian and its low spectrum (operator), the nonlinear bulk ground state
(bulk), the L4-constrained linear quotient (quotient), the lowest-band
Abrikosov energy (abrikosov), large-R extrapolation (asymptotics), and the
full Ginzburg-Landau functional with local diagnostics (fullgl).  The cli
module exposes all of it as the `glbulk` command.
"""

from .grid import (BoundaryCondition, Grid, LinkField, build_grid, build_links,
                   default_points, periodic_grid)
from .operator import EigenResult, MagneticOperator, lll_basis, lowest_eigenpairs
from ._descent import DescentOptions
from .bulk import (BulkProblem, BulkSolution, bulk_energy, l4_mass_check,
                   minimize_bulk, virial_check)
from .quotient import (QuotientProblem, QuotientSolution, duality_check,
                       minimize_quotient, quotient_value)
from .abrikosov import (AbrikosovResult, LLLProblem, abrikosov_energy,
                        minimize_abrikosov)
from .asymptotics import (LimitEstimate, PairResult, check_abrikosov_limit,
                          check_new_formula, extrapolate_blk, run_sweep,
                          solve_dual_pair)

__version__ = "0.1.0"
