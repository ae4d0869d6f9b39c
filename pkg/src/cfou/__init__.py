"""Complex fractional Ornstein-Uhlenbeck drift estimation and fBm kernel tools.

Submodules:

- ``fbm``: fBm/fGn covariances and exact circulant synthesis
- ``quad``: singular quadrature and large-``T`` expansion checks
- ``rkhs``: inner products in the fBm reproducing kernel space
- ``fou``: complex fOU simulation
- ``estimator``: least-squares drift estimator and Monte-Carlo harness
- ``kernels``: tensor norms of exponential kernels and contractions
- ``bridges``: alpha-order fBm and alpha-fractional bridge moments
"""

from .errors import (
    AccuracyError,
    CfouError,
    DegenerateDenominatorError,
    DiagnosticsError,
    DomainError,
    SynthesisError,
)
from .fbm import (
    ComplexPath,
    HurstParam,
    RealPath,
    Seed,
    UniformGrid,
    fbm_covariance,
    sample_complex_fbm,
    sample_fbm_path,
    sample_fgn,
)
from .fou import DriftParam, ergodic_average, simulate_fou, stationary_variance
from .rkhs import PiecewiseSmoothFn, grid_gram_inner, inner_product, norm_sq
from .estimator import asymptotic_constants, lse_gamma, normality_diagnostics, run_mc_experiment
from .kernels import ExpKernel, KernelKind, contraction_norm, divergence_probe, tensor_inner, tensor_norm_sq
from .bridges import (
    BridgeParams,
    Method,
    bridge_orthogonality,
    bridge_second_moment,
    holder_exponent_estimate,
    structure_function,
    xi_second_moment,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
