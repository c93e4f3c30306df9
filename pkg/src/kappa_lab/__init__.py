"""Top-share (quantile contribution) estimation under heavy tails.

The naive in-sample estimator of the share held by the top ``q`` fraction is
biased downward for fat-tailed laws and super-additive under pooling. This
package samples such laws, measures the bias by Monte Carlo, and offers
model-based (plug-in) alternatives.
"""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    LognormalParams,
    MixtureSpec,
    ParetoParams,
    Sample,
    kappa_cut_pareto,
    kappa_mixture,
    kappa_pareto,
    kappa_second_derivative,
    sample,
    theoretical_threshold,
)
from .errors import (  # noqa: E402
    DomainError,
    InconsistencyError,
    MonteCarloError,
    NumericError,
    ResolutionError,
)
from .estimators import (  # noqa: E402
    KappaEstimate,
    TailFit,
    empirical_threshold,
    hill_estimator,
    kappa_hat_h,
    kappa_hat_q,
    min_alpha_kappa,
    pareto_mle,
    plugin_kappa,
    stochastic_alpha_kappa,
)
