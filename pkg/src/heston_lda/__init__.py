"""Large-deviation machinery for a square-root stochastic volatility model.

The package computes the limiting cumulant generating function of the
variance path functionals alpha*V_t + beta*int V + delta*int 1/V, its
Legendre transform and effective domain, closed-form finite-horizon moment
generating functions with explosion detection, market-price-of-risk regime
classifiers, and a reproducible Monte Carlo harness that checks all of it
against simulation.
"""

from .core import (
    FunctionalCoeffs,
    ModelParams,
    PathRecord,
    cir_step,
    functional_value,
    girsanov_kernels,
    log_radon_nikodym_gamma1,
    radon_nikodym_gamma1,
    sample_variance_batch,
    simulate_log_price_path,
    simulate_variance_path,
    validate_params,
)
from .rates import (
    DomainInterval,
    RateEval,
    RateMinimum,
    cgf_derivative,
    cgf_limit,
    derivative_image,
    domain_of,
    legendre_closed_form_delta0,
    legendre_transform,
    rate_minimum,
)
from .mgf import (
    MgfExplosionError,
    MgfQuery,
    convergence_gap,
    kummer_1f1,
    log_mgf_alpha_beta,
    log_mgf_full,
)
from .regimes import (
    RegimeReport,
    classify_gamma1,
    classify_gamma2,
    classify_linear_arbitrage,
    classify_sublinear_arbitrage,
    sublinear_thresholds,
)
from .mc import (
    DecayEstimate,
    ErgodicReport,
    ErgodicStat,
    LdpComparison,
    MartingaleReport,
    StoppingReport,
    TailQuery,
    decay_fit,
    decay_slope,
    ergodic_check,
    estimate_prob,
    ldp_check,
    martingale_check,
    stopping_time_experiment,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    parse_config,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "ModelParams",
    "FunctionalCoeffs",
    "PathRecord",
    "validate_params",
    "cir_step",
    "sample_variance_batch",
    "simulate_variance_path",
    "simulate_log_price_path",
    "functional_value",
    "girsanov_kernels",
    "log_radon_nikodym_gamma1",
    "radon_nikodym_gamma1",
    # rate functions
    "DomainInterval",
    "RateEval",
    "RateMinimum",
    "domain_of",
    "cgf_limit",
    "cgf_derivative",
    "derivative_image",
    "legendre_transform",
    "legendre_closed_form_delta0",
    "rate_minimum",
    # finite-horizon MGFs
    "MgfQuery",
    "MgfExplosionError",
    "log_mgf_alpha_beta",
    "log_mgf_full",
    "kummer_1f1",
    "convergence_gap",
    # regime classification
    "RegimeReport",
    "classify_gamma1",
    "classify_gamma2",
    "classify_linear_arbitrage",
    "classify_sublinear_arbitrage",
    "sublinear_thresholds",
    # Monte Carlo harness
    "TailQuery",
    "DecayEstimate",
    "LdpComparison",
    "ErgodicStat",
    "ErgodicReport",
    "MartingaleReport",
    "StoppingReport",
    "estimate_prob",
    "decay_fit",
    "decay_slope",
    "ldp_check",
    "ergodic_check",
    "martingale_check",
    "stopping_time_experiment",
    # configuration
    "ExperimentConfig",
    "ConfigError",
    "parse_config",
    "config_to_dict",
    "config_from_dict",
]
