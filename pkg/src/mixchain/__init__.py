"""Exact dependence coefficients for finite stationary Markov chains.

Builds the reversible S(N, eps) block chains, computes the psi, rho, beta,
information and lambda coefficients exactly, and certifies that a truncated
independent product of calibrated blocks mixes fast in rho, beta and
information while its interlaced maximal correlation stays near 1.
"""

from .analysis import (
    fit_exponent,
    inequality_battery,
    pair_frequency_check,
    plugin_coefficient_check,
    spectral_rho_check,
    sweep,
)
from .building_blocks import (
    SBlockParams,
    build_s_block,
    check_threshold_inequality,
    dyadic_grid,
    s_block_joint,
    s_block_marginal,
)
from .chain_core import (
    FiniteChain,
    JointPMF2,
    JointTensor,
    is_reversible,
    joint_lags,
    m_step,
    pair_joint,
    sample_path,
    stationary_distribution,
)
from .dependence import (
    DependenceReport,
    beta_from_joint,
    dependence_report,
    entropy,
    eta,
    indicator_correlation,
    info_from_joint,
    lag_report,
    lambda_from_joint,
    psi_from_joint,
    psi_ratio_table,
    rho_index_sets,
    rho_max_corr,
)
from .errors import MixChainError
from .product_chain import (
    Certificate,
    ProductSpec,
    TheoremReport,
    calibrate_epsilon,
    certify_component,
    info_truncation_tail,
    product_beta_bound,
    product_coeff_info,
    product_coeff_rho,
    product_entropy,
    product_interlaced_lower,
    verify_theorem,
)

__version__ = "0.1.0"
