"""Finite-grid laboratory for random-feature function spaces.

Feature-based function spaces (``F_{p,pi}``, Barron, RKHS) are represented on
finite atomic measures. The package computes their norms, kernel and
spherical spectra, constrained least-squares fits, information-based
complexities and both sides of the estimation/approximation dual pair.
"""

from .complexity import (
    ComplexityQuery,
    ComplexityResult,
    i_complexity,
    i_complexity_fppi,
    i_complexity_rkhs,
    minimax_lower_noisy_generic,
    power_function,
    rademacher_mc,
)
from .duality import (
    DualityInstance,
    DualityReport,
    lagrangian_inner_check,
    lhs_estimation_side,
    rhs_approximation_side,
    verify,
)
from .errors import ConvergenceError, InfeasibleError, InputError
from .experiments import (
    ExperimentConfig,
    RunRecord,
    emit,
    gen_dataset,
    gen_target,
    load_records,
    run_approximation,
    run_cod_study,
    run_learning_curve,
    sphere_grid,
)
from .kernels import (
    SpectralDecomposition,
    dual_kernel,
    mercer,
    minimax_lower_noiseless,
    minimax_lower_noisy,
    primal_kernel,
    spectral_tail,
    tail_sum,
)
from .measures import (
    DiscreteMeasure,
    FeatureMap,
    barron_attaining_measure,
    barron_norm,
    coeff_norm,
    eval_feature_matrix,
    fp_norm,
    function_norm,
    synthesize,
)
from .solvers import (
    FitResult,
    LpBall,
    constrained_ls_fw,
    krr_kkt_residual,
    lmo_lp,
    min_norm_interpolant,
    norm_constrained_krr,
    predict,
    project_lp,
)
from .sphere import (
    SphericalSpectrum,
    eigenvalues_tk,
    fit_decay_exponent,
    kappa_profile,
    multiplicity,
    upper_bound_curve,
)

__version__ = "0.1.0"
