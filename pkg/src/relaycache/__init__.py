"""Caching placement and backhaul offloading analysis for relay-assisted mmWave networks."""
from .analytic import (
    SbopBreakdown,
    TierSpec,
    inverse_power_cdf,
    inverse_power_pdf,
    laplace_interference,
    sbop_noise_limited,
    sbop_one_hop,
    sbop_two_hop,
    total_sbop,
    two_hop_probability,
    uar_probabilities,
    weighted_pdf,
)
from .errors import ContractViolation, DegenerateDistributionError, NumericError, ValidationError
from .harness import ExperimentSpec, emit_association_snapshot, run_experiment
from .kernels import BACKEND
from .model import (
    CachingPolicy,
    ContentCatalog,
    GainPattern,
    NetworkConfig,
    gain_distribution,
    mpc_policy,
    uc_policy,
    zipf_popularity,
)
from .optimize_co import KktCoefficients, compute_kkt_coefficients, cp_co
from .optimize_poa import cp_poa, project_to_boundary
from .quadrature import QuadratureRule, gauss_laguerre
from .simulate import run_trials, sample_deployment

__version__ = "0.1.0"
