"""Monte Carlo gradient estimation for SDEs driven by subordinated noise.

Submodules: stable (subordinator sampling), timechange (deterministic
clocks), sde (pathwise solvers), bel (gradient estimators), spde
(spectral Galerkin SPDE), cli (experiment runner). Hot kernels run under
numba by default; set STABLEGRAD_NO_NUMBA=1 for the pure-numpy path.
"""

__version__ = "0.1.0"

from . import kernels
from .bel import (
    EstimatorConfig,
    GradientEstimate,
    TestFunction,
    estimate_gradient_bel,
    estimate_gradient_bismut,
    estimate_gradient_brownian,
    fd_oracle,
    pathwise_weight,
    tail_exponent_check,
    weight_moment_scaling,
)
from .sde import (
    DiffusionMatrix,
    DivergenceError,
    DriftModel,
    FlowState,
    solve_sde_euler,
    solve_time_changed,
    solve_variational,
)
from .spde import (
    GalerkinState,
    NonlinearityF,
    SpectralModel,
    convolution_moment_check,
    galerkin_convergence_check,
    gaussian_abs_moment,
    heat_eigenpairs,
    make_heat_model,
    sample_stochastic_convolution,
    solve_mild_galerkin,
    strong_feller_gap,
)
from .stable import (
    StableParams,
    SubordinatorPath,
    empirical_laplace_check,
    negative_moment_oracle,
    sample_brownian_at_subordinated_times,
    sample_positive_stable,
    sample_subordinator_path,
    stable_draws,
)
from .streams import RandomStream, sample_stream
from .timechange import (
    CadlagIncreasingPath,
    InversePath,
    SmoothedPath,
    discrete_bracket,
    invert,
    ito_integral_time_changed,
    load_path,
    save_path,
    smooth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
