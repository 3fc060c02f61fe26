"""Discrete fractional p-Laplacian problems with sublinear reactions.

Energy assembly, weighted principal eigenvalues, truncated-energy minimization
and property checks on a uniform 1D grid (2D rectangle for the core).
"""

from .domain import Grid, RectGrid, boundary_power, build_grid, build_rect_grid
from .nonlocal_core import (Kernel, apply_operator, assemble_kernel, energy_and_operator,
                            gagliardo_energy, jp, lp_norm, picone_gap)
from .reactions import (ExtendedReal, Reaction, custom_tabulated, eval_F, eval_f,
                        exponential_paper, logistic, power_combo, reaction_from_config, truncate,
                        validate_hypotheses)
from .solver import SolveResult, SolverOptions, minimize_truncated, multi_start_uniqueness, solve
from .spectral import EigenOptions, EigenResult, dense_oracle_p2, principal_eigenpair
from .verify import evaluate_criterion

__version__ = "0.1.0"
