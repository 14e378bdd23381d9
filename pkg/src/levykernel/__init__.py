"""Transition densities of pure-jump Levy processes and their kernel estimates."""

from .bounds import (BoundReport, CompoundKernelParams, ExpDecay, ExpLogDecay, Indicator, PowerDecay,
                     TailFunction, bell_power_bound, bell_subexp_bound, convolution_domination_check,
                     eval_compound_kernel, fit_lower, fit_upper, prepare_sweep, subexp_diagnostic)
from .decomposition import compound_series, decompose, poisson_law
from .density import DensityGrid, argmax_lex, auto_grid, density_convolution, density_fourier
from .errors import (ConfigError, GridCoverage, InsufficientDecay, InvalidMeasure, LevyKernelError,
                     ModelRejected, QuadratureFailure, ScaleUnreachable, SingularIntegrand)
from .exponent import ScaleSolver, check_condition_A, check_sandwich, psi, psi_L, psi_U, psi_star
from .grid import FiniteMeasure, GridSpec
from .levy_model import (DirectionalStable, DiscretizedStable, IsotropicStable, LevyTriplet, RadialDensity,
                         TabulatedAtoms, load_triplet, triplet_from_config)
from .models import PRESETS, preset

__version__ = "0.1.0"
