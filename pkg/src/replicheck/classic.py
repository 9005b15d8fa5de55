"""Classic frequentist comparators: Cochran's Q and Egger's regression.

These are the standard meta-analysis checks the Bayesian assessments are
benchmarked against.  Both work purely from (estimate, standard error)
summaries.
"""

from dataclasses import dataclass

from .model import InputError, NumericDegeneracyError
from .special import chi2_sf, t_sf


@dataclass(frozen=True)
class ClassicTestResult:
    statistic: float
    df: int
    p_value: float
    method: str


def cochran_q(studies):
    """Cochran's heterogeneity test.

    Q = sum w_i (beta_hat_i - pooled)^2 with w_i = 1/se_i^2 and the
    fixed-effect pooled mean; under homogeneity Q ~ chi-square(m - 1) and
    the p-value is its upper tail.
    """
    studies = list(studies)
    m = len(studies)
    if m < 2:
        raise InputError(f"Cochran's Q needs at least 2 studies, got {m}")
    w = [1.0 / s.var for s in studies]
    pooled = sum(wi * s.beta_hat for wi, s in zip(w, studies)) / sum(w)
    q = sum(wi * (s.beta_hat - pooled) ** 2 for wi, s in zip(w, studies))
    return ClassicTestResult(
        statistic=q, df=m - 1, p_value=chi2_sf(q, m - 1), method="cochran_q"
    )


def egger_test(studies):
    """Egger's regression test for funnel-plot asymmetry.

    Weighted least squares of the estimates on their standard errors with
    weights 1/se_i^2; the slope's t-statistic is referred to a two-sided
    t with m - 2 degrees of freedom.
    """
    studies = list(studies)
    m = len(studies)
    if m < 3:
        raise InputError(f"Egger's test needs at least 3 studies, got {m}")
    if len({s.se for s in studies}) < 2:
        raise NumericDegeneracyError(
            "Egger's test is undefined when all standard errors are identical"
        )
    w = [1.0 / s.var for s in studies]
    x = [s.se for s in studies]
    y = [s.beta_hat for s in studies]
    sw = sum(w)
    swx = sum(wi * xi for wi, xi in zip(w, x))
    swy = sum(wi * yi for wi, yi in zip(w, y))
    swxx = sum(wi * xi * xi for wi, xi in zip(w, x))
    swxy = sum(wi * xi * yi for wi, xi, yi in zip(w, x, y))
    swyy = sum(wi * yi * yi for wi, yi in zip(w, y))
    denom = sw * swxx - swx * swx
    slope = (sw * swxy - swx * swy) / denom
    intercept = (swy - slope * swx) / sw
    rss = sum(
        wi * (yi - intercept - slope * xi) ** 2 for wi, xi, yi in zip(w, x, y)
    )
    sigma2 = rss / (m - 2)
    if swyy - swy * swy / sw <= 1e-12 * swyy:
        # Estimate variation below these sums' cancellation noise floor
        # (~1e-6 relative) leaves slope and residuals both at roundoff
        # scale; their ratio is noise, and the funnel is flat.
        t = 0.0
    elif sigma2 <= 0.0:
        # Perfect fit: the slope is exact, its standard error collapses.
        t = float("inf") if slope != 0.0 else 0.0
    else:
        t = slope / (sigma2 * sw / denom) ** 0.5
    p = 2.0 * t_sf(abs(t), m - 2)
    return ClassicTestResult(statistic=t, df=m - 2, p_value=min(1.0, p), method="egger")
