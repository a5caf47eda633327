"""Detection limits in the rank-one spiked Wigner model.

Scalar-channel free energies, the replica-symmetric threshold, limiting
detection curves, and finite-size simulators for checking them.
"""

from .detection import (
    DomainError,
    curves,
    kl_limit,
    mu,
    mu_with_diagonal,
    optimal_error,
    per_type_error,
    tv_limit,
)
from .prior import (
    Prior,
    PriorError,
    make_discrete_prior,
    moment,
    prior_from_spec,
    rademacher,
    sparse_rademacher,
    standardize,
)
from .rs_threshold import (
    RSReport,
    SolverError,
    maximize_rs,
    reconstruction_threshold,
    rho_star,
    rs_potential,
    rs_report,
    spectral_threshold,
)
from .scalar_channel import DerivativeError, psi, psi_bar, psi_derivatives_at_zero, psi_hat

__version__ = "0.1.0"
