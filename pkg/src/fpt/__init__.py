"""First-passage times of one-dimensional mean-reverting diffusions.

Decay rates from the coefficient-ratio recursion with hyperbolic Aitken
acceleration, exact parabolic-cylinder rates for the OU model, cumulants,
a globally valid short/long-time density approximation, and independent
PDE / lattice / Monte Carlo oracles for validation.
"""

__version__ = "0.1.0"

from .errors import FptError, InputError, NumericsError
from .forcefield import (ForceField, InvariantMeasure, SdeSpec,
                         ClassificationFlags, builtin, lamperti, classify,
                         measure_from_drift, load_field)
from .oupcf import (PcfEval, pcf, pcf_eval, reflection_product,
                    rightmost_zero, hermite_leftmost_zero)
from .hseries import (HGrid, HTable, catalan_numbers, h1, build_table,
                      cumulant_integrand, integrate_h)
from .decay import (DecayEstimate, ratio_sequence, aitken_A0, aitken_A1,
                    estimate_lambda, lambda_asymptotic, lambda_exact,
                    tanh_eigenvalues)
from .cumulants import CumulantSet, cumulants, ou_mean_regime
from .density import (DensityModel, theta_fisher, nu_coefficient, build_model,
                      calibrate_rho, eval_density, log_density, h_ansatz,
                      solve_h_tilde, ou_short_time_remainder, levy_smirnov)
from .oracle import (SolutionGrid, TreeResult, McResult, solve_pde, solve_tree,
                     simulate, kolmogorov_distance, l1_distance)
