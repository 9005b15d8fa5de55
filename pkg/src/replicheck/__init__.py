"""Bayesian model-criticism toolkit for replicability assessment.

Given per-study effect estimates and standard errors, the package asks a
single question: are these results consistent with a deliberately
optimistic model of reproducible science?  A finite normal-mixture
reference model spans plausible effect scales and heterogeneity levels;
replication p-values quantify how surprising the observed data are under
it, analytically for an original/replication pair and by posterior
Monte Carlo for an exchangeable study set.  Classic comparators
(Cochran's Q, Egger regression) and a simulation lab for batch effects
and publication bias round out the toolkit.
"""

__version__ = "0.1.0"

from .classic import ClassicTestResult, cochran_q, egger_test
from .consistency import (
    DEFAULT_TARGETS,
    GammaLevel,
    default_gamma_levels,
    gamma_for_prob,
    sign_consistency_prob,
)
from .grid import (
    build_reference_model,
    default_exchangeable_model,
    default_two_group_model,
    exchangeable_lambda,
    two_group_lambda,
)
from .model import (
    ConfigError,
    HyperComponent,
    InfeasibleCensoringError,
    InputError,
    NumericDegeneracyError,
    PrpResult,
    ReferenceModel,
    ReplicationPair,
    StudySummary,
    make_reference_model,
)
from .posterior import (
    QUANTITY_EGGER,
    QUANTITY_Q,
    PosteriorDraw,
    TestQuantity,
    component_posterior,
    get_quantity,
    marginal_loglik,
    posterior_prp,
    quantity_egger,
    quantity_q,
    sample_posterior_draw,
)
from .prior import (
    MixtureNormal,
    component_posterior_weights,
    predictive_distribution,
    predictive_interval,
    prior_prp,
    prior_prp_pub_bias,
)
from .simlab import (
    BatchSimConfig,
    PubBiasSimConfig,
    SweepResult,
    sensitivity_sweep,
    simulate_batch_dataset,
    simulate_batch_pair,
    simulate_pubbias_dataset,
)

__all__ = [
    "__version__",
    "BatchSimConfig",
    "ClassicTestResult",
    "ConfigError",
    "DEFAULT_TARGETS",
    "GammaLevel",
    "HyperComponent",
    "InfeasibleCensoringError",
    "InputError",
    "MixtureNormal",
    "NumericDegeneracyError",
    "PosteriorDraw",
    "PrpResult",
    "PubBiasSimConfig",
    "QUANTITY_EGGER",
    "QUANTITY_Q",
    "ReferenceModel",
    "ReplicationPair",
    "StudySummary",
    "SweepResult",
    "TestQuantity",
    "build_reference_model",
    "cochran_q",
    "component_posterior",
    "component_posterior_weights",
    "default_exchangeable_model",
    "default_gamma_levels",
    "default_two_group_model",
    "egger_test",
    "exchangeable_lambda",
    "gamma_for_prob",
    "get_quantity",
    "make_reference_model",
    "marginal_loglik",
    "posterior_prp",
    "predictive_distribution",
    "predictive_interval",
    "prior_prp",
    "prior_prp_pub_bias",
    "quantity_egger",
    "quantity_q",
    "sample_posterior_draw",
    "sensitivity_sweep",
    "sign_consistency_prob",
    "simulate_batch_dataset",
    "simulate_batch_pair",
    "simulate_pubbias_dataset",
    "two_group_lambda",
]
