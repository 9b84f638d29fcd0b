"""Drift estimation for diffusions from classical and rough-path observations."""

from ._version import __version__
from .errors import (
    ConfigError,
    IncompatiblePathsError,
    InvalidArgumentError,
    InvalidModelError,
    NumericalDomainError,
    RoughMLEError,
    SingularInformationError,
    UnsupportedError,
)
from .gridpath import (
    Path,
    TimeGrid,
    holder_seminorm,
    left_riemann,
    make_uniform_grid,
    multiscale_lags,
    quadratic_variation,
    read_path,
    sup_distance,
    write_path,
)
from .roughcore import (
    Level2,
    RoughPath,
    area,
    check_chen,
    check_geometric,
    ito_integral,
    level2_window,
    lift_piecewise_linear,
    read_rough_path,
    rough_distance,
    rough_integral,
    write_rough_path,
)
from .models import ModelSpec, check_model, constant_sigma_model, ou_model
from .estimator import (
    AreaDecomposition,
    DriftEstimate,
    SpanDiagnostic,
    classical_mle,
    full_span_diagnostic,
    information_matrix,
    ito_score,
    ou2d_area_decomposition,
    ou2d_explicit,
    rough_mle,
    rough_score,
    scalar_ou_closed_form,
)
from .stochsim import (
    RngConfig,
    SimSpec,
    brownian_path,
    counterexample_pair,
    euler_maruyama,
    fbm_gap_variance,
    simulate_hurst_family,
    simulate_replicas,
    volterra_fbm,
)
from .config import ExperimentConfig, parse_config
from .experiments import (
    ResultTable,
    emit_table,
    read_table,
    run_consistency,
    run_counterexample,
    run_hurst_sweep,
    run_sigma_sweep,
)
