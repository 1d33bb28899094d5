"""Numerical checks of uniform convergence for stochastic nonconvex minimax problems."""

__version__ = "0.1.0"

from .domains import ConvexDomain, CoveringNet, covering_net, net_size, project, squared_bound
from .errors import (ArgumentError, CapacityError, ConfigurationError, ConvergenceError,
                     ReplicateError, UclabError, UnsupportedSettingError)
from .problems import (ConstantsRegistry, Dataset, MinimaxInstance, Objective,
                       make_instance, make_quadratic_scsc, make_sin_bilinear_ncc,
                       make_sin_bilinear_ncsc)
from .oracles import (InnerSolveConfig, brute_force_max_grid, brute_force_prox_grid,
                      gradient_mapping, inner_max, moreau_grad, primal_grad_ncsc, primal_value,
                      prox_point, regularized_primal)

__all__ = [
    "ArgumentError", "CapacityError", "ConfigurationError", "ConstantsRegistry",
    "ConvergenceError", "ConvexDomain", "CoveringNet", "Dataset", "InnerSolveConfig",
    "MinimaxInstance", "Objective", "ReplicateError", "UclabError", "UnsupportedSettingError",
    "brute_force_max_grid", "brute_force_prox_grid", "covering_net", "gradient_mapping",
    "inner_max", "make_instance", "make_quadratic_scsc", "make_sin_bilinear_ncc",
    "make_sin_bilinear_ncsc", "moreau_grad", "net_size", "primal_grad_ncsc", "primal_value",
    "project", "prox_point", "regularized_primal", "squared_bound",
]
