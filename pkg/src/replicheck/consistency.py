"""Sign-consistency calibration of the heterogeneity fraction.

For a hierarchical normal model where a study draws its true effect
theta ~ N(mu, phi_sq) around a shared mean mu ~ N(0, omega_sq), write
gamma = phi_sq / (phi_sq + omega_sq) for the heterogeneity fraction.
Two studies of the same phenomenon then agree in sign with probability

    p(gamma) = sqrt(2/pi) * int_0^inf Phi(sqrt((1-gamma)/gamma) * t)
                                 * exp(-t^2 / 2) dt,

which decreases from 1 (no heterogeneity) to 1/2 (pure noise around a
zero-centered mean).  Inverting p fixes gamma from a requested
sign-consistency level, which is how the reference model's gamma grid is
chosen.

The integral is evaluated by adaptive Simpson quadrature.  A closed-form
identity exists and is used as an independent oracle in the test suite,
deliberately not here, so the production path and its check stay separate.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from .model import ConfigError
from .special import norm_cdf

DEFAULT_TARGETS = (1.0, 0.99, 0.975, 0.95)

_QUAD_TOL = 1e-12
_MAX_DEPTH = 60
# exp(-t^2/2) at t = 10 is ~2e-22; truncation error is far below _QUAD_TOL.
_UPPER_LIMIT = 10.0


@dataclass(frozen=True)
class GammaLevel:
    """A heterogeneity fraction together with the consistency target it hits."""

    target: float
    gamma: float


def _simpson_recurse(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _simpson_recurse(
        f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1
    ) + _simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)


def _adaptive_simpson(f, a, b, tol, max_depth):
    fa = f(a)
    fb = f(b)
    fm = f(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)


def sign_consistency_prob(gamma):
    """Probability that two studies share the sign of their true effects.

    Monotone decreasing in gamma, with p(0) = 1 and p(1) = 1/2.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return 1.0
    c = math.sqrt((1.0 - gamma) / gamma)

    def integrand(t):
        return norm_cdf(c * t) * math.exp(-0.5 * t * t)

    integral = _adaptive_simpson(integrand, 0.0, _UPPER_LIMIT, _QUAD_TOL, _MAX_DEPTH)
    return math.sqrt(2.0 / math.pi) * integral


@lru_cache(maxsize=None)
def gamma_for_prob(target):
    """Heterogeneity fraction whose sign-consistency probability is ``target``.

    Bisection on the monotone map, resolved to ~1e-12 in gamma.  A target
    of exactly 1 pins gamma = 0 (the perfectly reproducible component).
    """
    target = float(target)
    if not 0.5 < target <= 1.0:
        raise ConfigError(
            f"sign-consistency target must lie in (0.5, 1.0], got {target}"
        )
    if target == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if sign_consistency_prob(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13:
            break
    return 0.5 * (lo + hi)


def default_gamma_levels(targets=DEFAULT_TARGETS):
    """Resolve a set of consistency targets into GammaLevel entries.

    Targets are deduplicated and sorted from the strictest (highest
    consistency, lowest gamma) down.
    """
    uniq = sorted({float(t) for t in targets}, reverse=True)
    if not uniq:
        raise ConfigError("need at least one sign-consistency target")
    return tuple(GammaLevel(target=t, gamma=gamma_for_prob(t)) for t in uniq)
