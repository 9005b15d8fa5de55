"""Analytic replication assessment for an original/replication pair.

Conditioning each reference component on the original estimate gives a
normal posterior for the shared mean and hence a normal predictive for the
replication estimate; mixing over components with data-reweighted weights
gives the full predictive, a finite normal mixture that we can evaluate
exactly.  The replication p-value is a tail probability of that mixture at
the observed replication estimate, and the predictive interval is a pair
of its quantiles, so the "p below alpha" and "estimate outside the
central interval" decisions agree by construction.
"""

import math
from dataclasses import dataclass

from .grid import default_two_group_model
from .model import InputError, PrpResult
from .special import log_sum_exp, norm_cdf, norm_logpdf

SIDEDNESS = ("two", "high", "low")


@dataclass(frozen=True)
class MixtureNormal:
    """Finite mixture of normals with strictly positive variances."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.variances)):
            raise ValueError("mixture parameter lengths differ")
        if any(v <= 0.0 for v in self.variances):
            raise ValueError("mixture variances must be positive")

    def cdf(self, x):
        return sum(
            w * norm_cdf((x - m) / math.sqrt(v))
            for w, m, v in zip(self.weights, self.means, self.variances)
            if w > 0.0
        )

    def quantile(self, p):
        """Inverse CDF by bisection; p must lie strictly inside (0, 1)."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {p}")
        sds = [math.sqrt(v) for v in self.variances]
        lo = min(m - 10.0 * s for m, s in zip(self.means, sds))
        hi = max(m + 10.0 * s for m, s in zip(self.means, sds))
        span = hi - lo
        while self.cdf(lo) > p:
            lo -= span
        while self.cdf(hi) < p:
            hi += span
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, abs(lo), abs(hi)):
                break
        return 0.5 * (lo + hi)


def component_posterior_weights(original, model):
    """Mixture weights after observing the original estimate.

    Each component's weight is its prior weight times the marginal
    likelihood N(beta_hat_orig | 0, omega_sq + phi_sq + se_orig^2),
    normalized in log space.
    """
    logs = [
        math.log(c.weight)
        + norm_logpdf(original.beta_hat, 0.0, c.total_var + original.var)
        for c in model.components
    ]
    total = log_sum_exp(logs)
    return tuple(math.exp(l - total) for l in logs)


def predictive_distribution(original, rep_se, model):
    """Predictive mixture for a replication estimate with standard error rep_se.

    Component k contributes a normal with

        mean_k = V_k * beta_hat_orig / (se_orig^2 + phi_sq_k)
        var_k  = V_k + phi_sq_k + rep_se^2
        V_k    = 1 / (1 / (se_orig^2 + phi_sq_k) + 1 / omega_sq_k),

    the posterior-mean/posterior-variance of the shared mean propagated
    through a fresh study draw.  A component with omega_sq = 0 pins the
    shared mean at zero (V_k = 0, mean_k = 0).
    """
    if not (rep_se > 0.0):
        raise InputError(f"replication standard error must be positive, got {rep_se}")
    weights = component_posterior_weights(original, model)
    means = []
    variances = []
    for c in model.components:
        obs_var = original.var + c.phi_sq
        if c.omega_sq > 0.0:
            v = 1.0 / (1.0 / obs_var + 1.0 / c.omega_sq)
            mean = v * original.beta_hat / obs_var
        else:
            v = 0.0
            mean = 0.0
        means.append(mean)
        variances.append(v + c.phi_sq + rep_se * rep_se)
    return MixtureNormal(
        weights=weights, means=tuple(means), variances=tuple(variances)
    )


def predictive_interval(dist, alpha):
    """Central (1 - alpha) interval of a predictive mixture."""
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    return (dist.quantile(0.5 * alpha), dist.quantile(1.0 - 0.5 * alpha))


def prior_prp(pair, model=None, sided="two", alpha=0.05):
    """Replication p-value for the observed replication estimate.

    ``sided`` picks the tail: "high" asks whether the replication estimate
    is surprisingly large, "low" surprisingly small, and "two" doubles the
    smaller tail (capped at 1).  The central (1 - alpha) predictive
    interval is computed alongside; for the two-sided p,
    p < alpha holds exactly when the estimate falls outside that interval.
    """
    if sided not in SIDEDNESS:
        raise InputError(f"sided must be one of {SIDEDNESS}, got {sided!r}")
    if model is None:
        model = default_two_group_model(pair.original)
    dist = predictive_distribution(pair.original, pair.replication.se, model)
    x = pair.replication.beta_hat
    cdf = dist.cdf(x)
    if sided == "high":
        p = 1.0 - cdf
    elif sided == "low":
        p = cdf
    else:
        p = min(1.0, 2.0 * min(cdf, 1.0 - cdf))
    return PrpResult(
        p_value=p,
        sidedness=sided,
        statistic_name="replication_estimate",
        statistic_value=x,
        component_posteriors=dist.weights,
        predictive_interval=predictive_interval(dist, alpha),
    )


def prior_prp_pub_bias(pair, model=None):
    """One-sided replication p-value for the shrinkage ratio.

    The statistic is beta_hat_rep / beta_hat_orig; selection on
    significance inflates originals, so suspiciously small ratios are the
    signal and the p-value is the predictive probability of a ratio at or
    below the observed one.  With the original held fixed that tail
    reduces to a tail of the predictive for the replication estimate,
    with direction set by the sign of the original.
    """
    if model is None:
        model = default_two_group_model(pair.original)
    b_orig = pair.original.beta_hat
    if b_orig == 0.0:
        raise InputError(
            "shrinkage ratio is undefined when the original estimate is exactly zero"
        )
    dist = predictive_distribution(pair.original, pair.replication.se, model)
    x = pair.replication.beta_hat
    cdf = dist.cdf(x)
    p = cdf if b_orig > 0.0 else 1.0 - cdf
    return PrpResult(
        p_value=p,
        sidedness="low",
        statistic_name="shrinkage_ratio",
        statistic_value=x / b_orig,
        component_posteriors=dist.weights,
        predictive_interval=None,
    )
