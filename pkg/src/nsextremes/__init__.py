"""Non-stationary peaks-over-threshold inference with directional covariates.

Generalised Pareto shape and scale vary smoothly with a periodic
covariate through Constant, Spline, Fourier or Gaussian-process bases.
Fits use penalised likelihood with bootstrap, or Metropolis-within-Gibbs
with random-walk or mMALA proposals; return-value distributions under
fitted models are compared with known synthetic truths.
"""

from ._backend import BACKEND
from .basis import BasisSpec, evaluate_basis, param_curve, roughness_matrix
from .cases import builtin_case, simulate_sample, truth_curves
from .errors import ContractError, DomainError, NSExtremesError, NumericError
from .gpd import PeaksSample
from .mcmc import ChainConfig, run_chain
from .mle import cross_validate, bootstrap, fit_mle, irls_fit
from .model import CoefficientState, Design, PosteriorDraws
from .retval import percentile, simulate_return_distribution

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BasisSpec", "ChainConfig", "CoefficientState", "ContractError", "Design",
    "DomainError", "NSExtremesError", "NumericError", "PeaksSample", "PosteriorDraws",
    "bootstrap", "builtin_case", "cross_validate", "evaluate_basis", "fit_mle", "irls_fit",
    "param_curve", "percentile", "roughness_matrix", "run_chain", "simulate_return_distribution",
    "simulate_sample", "truth_curves",
]
