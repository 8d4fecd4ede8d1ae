"""Scale functions of spectrally negative Levy processes and optimal dividend barriers."""

from .coeffs import FactorCoefficients, check_identities, compute_A, compute_scalars, factor_coefficients
from .dividends import (
    PolicyKind,
    PolicyResult,
    ValueBounds,
    ValueFunction,
    bailout_barrier,
    bailout_bounds,
    cgmy_sweep,
    classic_barrier,
    classic_bounds,
    impulse_policy,
    terminal_barrier,
)
from .errors import LevyScaleError, NumericalError, RunStrategySignal, ValidationError
from .expsum import ExpSum
from .harness import RunConfig, reproduce, run
from .models import (
    BetaFamily,
    CaseTag,
    CgmyTarget,
    Hyperexponential,
    PhaseType,
    SpectralModel,
    boundary_constants,
    laplace_exponent,
    laplace_exponent_derivative,
    levy_density,
    table1_model,
)
from .roots import RootSystem, enumerate_poles, root_system, solve_negative_roots, solve_positive_root
from .scale import (
    ScaleBundle,
    TruncationBounds,
    build_scale_finite,
    build_scale_meromorphic,
    evaluate,
    laplace_check,
    scale_functions,
    w_zeta_version,
)

__version__ = "0.1.0"
