"""Construction of the reference model's variance grid.

A reference component is a pair (omega_sq, phi_sq) obtained by splitting a
total effect-scale variance lambda_sq into a shared part and a
heterogeneous part according to a heterogeneity fraction gamma:

    omega_sq = (1 - gamma) * lambda_sq,    phi_sq = gamma * lambda_sq.

The lambda grid is anchored to the observed data so the mixture stays
weakly informative on the right scale; the gamma grid comes from
sign-consistency targets (see consistency.py).  The full model is the
Cartesian product of the two grids with equal prior weight.
"""

from functools import lru_cache

from .consistency import DEFAULT_TARGETS, default_gamma_levels
from .model import ConfigError, HyperComponent, InputError, ReferenceModel

_LAMBDA_FLOOR_ABS = 1e-8
_LAMBDA_FLOOR_REL = 1e-6


@lru_cache(maxsize=None)
def _chi2_1_quartiles():
    from .special import chi2_inv_cdf

    return tuple(chi2_inv_cdf(p, 1) for p in (0.25, 0.5, 0.75))


def two_group_lambda(original):
    """Effect-scale grid for an original/replication pair.

    Under a zero-centered scale-lambda_sq model the original estimate
    satisfies beta_hat^2 + se^2 ~ lambda_sq * chi-square(1) in
    expectation-matching terms, so dividing the observed magnitude by the
    chi-square(1) quartiles gives three scales that bracket the data:
    the upper quartile yields the smallest lambda_sq, the lower quartile
    the largest.
    """
    q1, q2, q3 = _chi2_1_quartiles()
    s = original.beta_hat**2 + original.var
    return (s / q3, s / q2, s / q1)


def exchangeable_lambda(studies):
    """Effect-scale grid for a set of exchangeable studies.

    Centers on the fixed-effect pooled estimate and steps one pooled
    standard error to either side, squaring to get variance scales.  Zero
    entries (possible when the pooled mean is 0 or exactly +-1 pooled se)
    are floored to keep every component a proper distribution.
    """
    studies = list(studies)
    if not studies:
        raise InputError("need at least one study to build a variance grid")
    prec = [1.0 / s.var for s in studies]
    total_prec = sum(prec)
    pooled = sum(p * s.beta_hat for p, s in zip(prec, studies)) / total_prec
    pooled_se = total_prec**-0.5
    floor = max(_LAMBDA_FLOOR_ABS, _LAMBDA_FLOOR_REL * max(s.var for s in studies))
    lams = sorted(((pooled - pooled_se) ** 2, pooled**2, (pooled + pooled_se) ** 2))
    return tuple(max(lam, floor) for lam in lams)


def build_reference_model(lambda_grid, gamma_levels):
    """Cartesian product of a lambda_sq grid and gamma levels, equal weights.

    Components are ordered lambda-major (ascending), gamma-minor
    (ascending within each lambda).  Result vectors that align with
    components follow this ordering.
    """
    lams = [float(l) for l in lambda_grid]
    if not lams:
        raise ConfigError("lambda grid must be nonempty")
    for lam in lams:
        if not (lam > 0.0):
            raise ConfigError(f"lambda_sq entries must be positive, got {lam}")
    levels = sorted(gamma_levels, key=lambda lv: lv.gamma)
    if not levels:
        raise ConfigError("need at least one gamma level")
    w = 1.0 / (len(lams) * len(levels))
    comps = []
    for lam in sorted(lams):
        for lv in levels:
            comps.append(
                HyperComponent(
                    omega_sq=(1.0 - lv.gamma) * lam,
                    phi_sq=lv.gamma * lam,
                    gamma=lv.gamma,
                    weight=w,
                )
            )
    return ReferenceModel(components=tuple(comps))


def default_two_group_model(original, gamma_targets=DEFAULT_TARGETS, lambda_override=None):
    """Reference model for the original/replication scenario."""
    lams = _resolve_lambda(lambda_override, lambda x=original: two_group_lambda(x))
    return build_reference_model(lams, default_gamma_levels(gamma_targets))


def default_exchangeable_model(studies, gamma_targets=DEFAULT_TARGETS, lambda_override=None):
    """Reference model for the exchangeable many-study scenario."""
    lams = _resolve_lambda(lambda_override, lambda xs=studies: exchangeable_lambda(xs))
    return build_reference_model(lams, default_gamma_levels(gamma_targets))


def _resolve_lambda(override, default_fn):
    if override is None:
        return default_fn()
    lams = tuple(float(l) for l in override)
    if not lams:
        raise ConfigError("lambda override must be nonempty")
    return lams
