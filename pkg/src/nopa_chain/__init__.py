"""Coherent-feedback chains of nondegenerate optical parametric amplifiers.

Linear quadrature models, stability thresholds, two-mode squeezing spectra
and cavity-mode entanglement for N-NOPA chains with fibre losses and delays.
"""

from .model import (
    GAMMA_R,
    KAPPA_SLOPE,
    FrequencyMatrices,
    LossScenario,
    ModelError,
    NetworkConfig,
    NopaParams,
    StateSpace,
    assemble_frequency_matrices,
    assemble_state_space,
    compose_by_interconnection,
    make_config,
    make_params,
    scenario_config,
    theta_defaults,
    transmission_rate,
)
from .stability import (
    DdeSpectrumReport,
    StabilityReport,
    bisection_threshold,
    dde_rightmost_root,
    is_hurwitz,
    stability_threshold,
    threshold_eigen_reduction,
    threshold_table,
)
from .spectra import (
    SqueezingSpectrum,
    closed_form_v0,
    epr_entangled,
    squeezing_spectra,
    transfer_function,
)
from .gaussian import (
    CovarianceMatrix,
    NegativityReport,
    collective_covariance,
    covariance_trajectory,
    log_negativity,
    mode_pair_submatrix,
    negativity_suite,
    steady_state_covariance,
)
from .sweep import (
    SweepResult,
    equal_power_x,
    find_x_for_target_v0,
    optimal_x,
    threshold_approach_curve,
)

__version__ = "0.1.0"
