"""Simulation laboratory: contaminated and selection-biased data generators.

Two mechanisms that break replicability are modeled.  Batch contamination
injects an unobserved binary factor, correlated with the case-control
labels, into a quantitative-trait experiment; fitting the usual linear
model then yields biased summary statistics.  Publication bias censors
logistic association experiments on their p-values, either hard (keep
only p below a threshold) or soft (retain with probability
exp(-c * p^1.5)).

All generators consume a caller-supplied numpy Generator and are
deterministic given (config, seed).  ``sensitivity_sweep`` runs a grid of
contamination magnitudes through the matching assessment engine with one
seed substream per (magnitude, replicate) cell.
"""

import math
from dataclasses import dataclass

import numpy as np

from .consistency import gamma_for_prob
from .grid import default_exchangeable_model, default_two_group_model
from .model import (
    ConfigError,
    InfeasibleCensoringError,
    InputError,
    NumericDegeneracyError,
    ReplicationPair,
    StudySummary,
)
from .posterior import QUANTITY_EGGER, QUANTITY_Q, posterior_prp
from .prior import prior_prp, prior_prp_pub_bias
from .special import norm_sf

DEFAULT_MAX_ATTEMPTS = 1_000_000

SCENARIOS = (
    "batch-two-group",
    "batch-exchangeable",
    "pubbias-two-group",
    "pubbias-exchangeable",
)


@dataclass(frozen=True)
class BatchSimConfig:
    """Batch-contamination design.

    ``residual_sd`` may be a single value or one value per experiment
    (the noisy-replication settings vary it for the replication only).
    ``heterogeneity_target`` switches on experiment-specific true effects:
    the shared mean is redrawn per dataset from N(0, true_effect^2) and
    each experiment's effect scatters around it with the heterogeneity
    fraction implied by the sign-consistency target.  When None, every
    experiment uses ``true_effect`` exactly.
    """

    n_per_group: int = 200
    true_effect: float = 0.5
    eta: float = 0.0
    residual_sd: float | tuple[float, ...] = 1.0
    batch_label_corr: float = 0.7
    n_experiments: int = 2
    n_contaminated: int = 1
    heterogeneity_target: float | None = None

    def __post_init__(self):
        if self.n_per_group < 2:
            raise ConfigError(f"n_per_group must be >= 2, got {self.n_per_group}")
        if self.n_experiments < 1:
            raise ConfigError(f"n_experiments must be >= 1, got {self.n_experiments}")
        if not 0 <= self.n_contaminated <= self.n_experiments:
            raise ConfigError(
                f"n_contaminated must lie in [0, n_experiments], got {self.n_contaminated}"
            )
        if self.eta < 0.0:
            raise ConfigError(f"eta must be nonnegative, got {self.eta}")
        if not 0.0 <= self.batch_label_corr < 1.0:
            raise ConfigError(
                f"batch_label_corr must lie in [0, 1), got {self.batch_label_corr}"
            )
        sds = self.residual_sds()
        if any(sd <= 0.0 for sd in sds):
            raise ConfigError(f"residual_sd entries must be positive, got {sds}")
        if self.heterogeneity_target is not None and self.true_effect == 0.0:
            raise ConfigError(
                "heterogeneity_target needs a nonzero true_effect to set the scale"
            )

    def residual_sds(self):
        if isinstance(self.residual_sd, (int, float)):
            return (float(self.residual_sd),) * self.n_experiments
        sds = tuple(float(s) for s in self.residual_sd)
        if len(sds) != self.n_experiments:
            raise ConfigError(
                f"residual_sd needs one entry per experiment "
                f"({self.n_experiments}), got {len(sds)}"
            )
        return sds


@dataclass(frozen=True)
class PubBiasSimConfig:
    """Publication-bias design over balanced two-arm logistic experiments.

    Exactly one censoring mechanism applies per design: ``p_threshold``
    (hard, original experiment only) for "two_group" and
    ``censor_strength_c`` (soft, every experiment) for "exchangeable".
    ``heterogeneity_target`` defaults to 0.96 for the exchangeable design
    and to no heterogeneity for the two-group one, mirroring the
    generating processes the assessments are benchmarked on.
    """

    design: str
    odds_ratio: float = 2.0 / 3.0
    sample_sizes: tuple[int, ...] | None = None
    p_threshold: float | None = None
    censor_strength_c: float | None = None
    heterogeneity_target: float | None = None
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if self.design not in ("two_group", "exchangeable"):
            raise ConfigError(f"design must be two_group or exchangeable, got {self.design!r}")
        if self.odds_ratio <= 0.0:
            raise ConfigError(f"odds_ratio must be positive, got {self.odds_ratio}")
        if self.max_attempts < 1:
            raise ConfigError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.design == "two_group":
            if self.p_threshold is None or self.censor_strength_c is not None:
                raise ConfigError("two_group design censors via p_threshold only")
            if not self.p_threshold > 0.0:
                raise ConfigError(f"p_threshold must be positive, got {self.p_threshold}")
            sizes = self.sample_sizes or (200, 200)
            if len(sizes) != 2:
                raise ConfigError("two_group design needs exactly 2 sample sizes")
        else:
            if self.censor_strength_c is None or self.p_threshold is not None:
                raise ConfigError("exchangeable design censors via censor_strength_c only")
            if self.censor_strength_c < 0.0:
                raise ConfigError(
                    f"censor_strength_c must be nonnegative, got {self.censor_strength_c}"
                )
            sizes = self.sample_sizes or (200,) * 5 + (500,) * 3 + (1000,) * 2
        sizes = tuple(int(n) for n in sizes)
        for n in sizes:
            if n < 4 or n % 2:
                raise ConfigError(f"sample sizes must be even and >= 4, got {n}")
        object.__setattr__(self, "sample_sizes", sizes)
        if self.heterogeneity_target is None and self.design == "exchangeable":
            object.__setattr__(self, "heterogeneity_target", 0.96)
        if self.heterogeneity_target is not None and self.odds_ratio == 1.0:
            raise ConfigError(
                "heterogeneity_target needs odds_ratio != 1 to set the scale"
            )

    def phi_sq(self):
        """Between-experiment variance implied by the sign-consistency target."""
        if self.heterogeneity_target is None:
            return 0.0
        gamma = gamma_for_prob(self.heterogeneity_target)
        scale_sq = math.log(self.odds_ratio) ** 2
        return scale_sq * gamma / (1.0 - gamma)


def fit_linear_summary(x, y):
    """Slope and standard error from simple linear regression with intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n < 3:
        raise NumericDegeneracyError("linear fit needs at least 3 observations")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise NumericDegeneracyError("regressor has zero variance")
    beta = float(xc @ y) / sxx
    resid = y - y.mean() - beta * xc
    sigma2 = float(resid @ resid) / (n - 2)
    return beta, math.sqrt(sigma2 / sxx)


def _expit(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def fit_two_arm_logistic(y0, n0, y1, n1):
    """Newton-Raphson logistic fit for a balanced two-arm binomial design.

    Returns (log odds ratio estimate, its standard error, two-sided Wald
    p-value).  Callers must screen out separated tables (a zero cell)
    before fitting; the likelihood has no finite optimum there.
    """
    a = b = 0.0
    for _ in range(50):
        mu0 = _expit(a)
        mu1 = _expit(a + b)
        g_b = y1 - n1 * mu1
        g_a = g_b + (y0 - n0 * mu0)
        if max(abs(g_a), abs(g_b)) < 1e-10:
            break
        v0 = n0 * mu0 * (1.0 - mu0)
        v1 = n1 * mu1 * (1.0 - mu1)
        # Information matrix [[v0+v1, v1], [v1, v1]]; solve directly.
        det = v1 * v0
        da = (v1 * g_a - v1 * g_b) / det
        db = ((v0 + v1) * g_b - v1 * g_a) / det
        a += da
        b += db
    else:
        raise NumericDegeneracyError("logistic fit did not converge in 50 iterations")
    mu0 = _expit(a)
    mu1 = _expit(a + b)
    v0 = n0 * mu0 * (1.0 - mu0)
    v1 = n1 * mu1 * (1.0 - mu1)
    se = math.sqrt(1.0 / v1 + 1.0 / v0)
    p = 2.0 * norm_sf(abs(b) / se)
    return b, se, p


def simulate_batch_dataset(cfg, rng):
    """Generate one batch-contamination dataset as study summaries.

    The first ``n_contaminated`` experiments receive a batch effect drawn
    from N(0, eta^2); batch labels are the case labels flipped
    independently with probability (1 - batch_label_corr)/2, which makes
    the expected label correlation equal batch_label_corr.
    """
    sds = cfg.residual_sds()
    if cfg.heterogeneity_target is None:
        thetas = [cfg.true_effect] * cfg.n_experiments
    else:
        gamma = gamma_for_prob(cfg.heterogeneity_target)
        omega = abs(cfg.true_effect)
        phi = omega * math.sqrt(gamma / (1.0 - gamma)) if gamma > 0.0 else 0.0
        shared = omega * rng.standard_normal()
        thetas = list(shared + phi * rng.standard_normal(cfg.n_experiments))

    flip_prob = 0.5 * (1.0 - cfg.batch_label_corr)
    n = 2 * cfg.n_per_group
    case = np.concatenate([np.ones(cfg.n_per_group), -np.ones(cfg.n_per_group)])
    out = []
    for i in range(cfg.n_experiments):
        flips = rng.random(n) < flip_prob
        batch = np.where(flips, -case, case)
        if i < cfg.n_contaminated:
            effect = cfg.eta * rng.standard_normal()
        else:
            effect = 0.0
        y = thetas[i] * case + effect * batch + sds[i] * rng.standard_normal(n)
        beta, se = fit_linear_summary(case, y)
        out.append(StudySummary(study_id=f"study_{i + 1}", beta_hat=beta, se=se))
    return out


def simulate_batch_pair(cfg, rng):
    """Two-experiment batch dataset packaged as an original/replication pair."""
    if cfg.n_experiments != 2:
        raise ConfigError(
            f"pair output needs n_experiments == 2, got {cfg.n_experiments}"
        )
    first, second = simulate_batch_dataset(cfg, rng)
    return ReplicationPair(original=first, replication=second)


def _draw_logistic_experiment(theta, n_samples, rng):
    """One two-arm binomial experiment; returns None on separation."""
    half = n_samples // 2
    y1 = int(rng.binomial(half, _expit(theta)))
    y0 = int(rng.binomial(half, 0.5))
    if y1 in (0, half) or y0 in (0, half):
        return None
    return fit_two_arm_logistic(y0, half, y1, half)


def simulate_pubbias_dataset(cfg, rng):
    """Generate one selection-biased dataset.

    Two-group: the original experiment is regenerated until its Wald
    p-value beats the threshold (a threshold >= 1 disables censoring);
    the replication is never censored.  Exchangeable: every experiment is
    regenerated until a retention coin with probability exp(-c * p^1.5)
    lands heads; each attempt redraws the experiment's true effect, so
    retained studies are draws from the selected population.
    """
    theta0 = math.log(cfg.odds_ratio)
    phi = math.sqrt(cfg.phi_sq())

    def accepted_experiment(idx, n_samples, censored):
        for _ in range(cfg.max_attempts):
            theta = theta0 + phi * rng.standard_normal() if phi > 0.0 else theta0
            fit = _draw_logistic_experiment(theta, n_samples, rng)
            if fit is None:
                continue
            beta, se, p = fit
            if censored == "hard":
                if cfg.p_threshold >= 1.0 or p < cfg.p_threshold:
                    return beta, se
            elif censored == "soft":
                if rng.random() < math.exp(-cfg.censor_strength_c * p**1.5):
                    return beta, se
            else:
                return beta, se
        raise InfeasibleCensoringError(
            f"experiment {idx}: no dataset accepted within {cfg.max_attempts} attempts"
        )

    if cfg.design == "two_group":
        b_o, se_o = accepted_experiment(0, cfg.sample_sizes[0], "hard")
        b_r, se_r = accepted_experiment(1, cfg.sample_sizes[1], None)
        return ReplicationPair(
            original=StudySummary(study_id="study_1", beta_hat=b_o, se=se_o),
            replication=StudySummary(study_id="study_2", beta_hat=b_r, se=se_r),
        )
    out = []
    for i, n_samples in enumerate(cfg.sample_sizes):
        beta, se = accepted_experiment(i, n_samples, "soft")
        out.append(StudySummary(study_id=f"study_{i + 1}", beta_hat=beta, se=se))
    return out


@dataclass(frozen=True)
class SweepRecord:
    replicate: int
    magnitude: float
    method: str
    p_value: float


@dataclass(frozen=True)
class SweepSummary:
    magnitude: float
    method: str
    flag_rate: float


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    summary: tuple[SweepSummary, ...]
    alpha: float


def _replicate_rng(seed, mag_idx, rep):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(mag_idx, rep))
    )


def sensitivity_sweep(
    scenario, magnitudes, n_reps, alpha=0.05, seed=42, draws=2000, config=None
):
    """Flag rates of the matching assessment across contamination magnitudes.

    ``magnitudes`` binds to eta for batch scenarios, to the hard threshold
    for "pubbias-two-group", and to the soft censoring strength for
    "pubbias-exchangeable".  ``config`` carries overrides for the
    scenario's simulation config (a mapping of field names).  Each
    (magnitude, replicate) cell runs on its own seed substream, so results
    are deterministic and insensitive to evaluation order.  Two-group
    publication bias reports both the general two-sided assessment and the
    shrinkage-ratio one; exchangeable publication bias reports both test
    quantities.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if n_reps < 1:
        raise ConfigError(f"n_reps must be >= 1, got {n_reps}")
    if not magnitudes:
        raise ConfigError("need at least one magnitude")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    overrides = dict(config or {})

    records = []
    for mag_idx, mag in enumerate(magnitudes):
        cfg = _sweep_config(scenario, float(mag), overrides)
        for rep in range(n_reps):
            rng = _replicate_rng(seed, mag_idx, rep)
            for method, p in _assess_replicate(scenario, cfg, rng, draws):
                records.append(
                    SweepRecord(
                        replicate=rep, magnitude=float(mag), method=method, p_value=p
                    )
                )

    summary = []
    for mag in magnitudes:
        mag = float(mag)
        methods = sorted({r.method for r in records if r.magnitude == mag})
        for method in methods:
            ps = [
                r.p_value
                for r in records
                if r.magnitude == mag and r.method == method
            ]
            flag = sum(1 for p in ps if p < alpha) / len(ps)
            summary.append(SweepSummary(magnitude=mag, method=method, flag_rate=flag))
    return SweepResult(
        records=tuple(records), summary=tuple(summary), alpha=alpha
    )


def _sweep_config(scenario, mag, overrides):
    if scenario == "batch-two-group":
        base = dict(eta=mag, n_experiments=2, n_contaminated=1)
        base.update(overrides)
        return BatchSimConfig(**base)
    if scenario == "batch-exchangeable":
        base = dict(
            eta=mag, n_experiments=5, n_contaminated=2, heterogeneity_target=0.96
        )
        base.update(overrides)
        return BatchSimConfig(**base)
    if scenario == "pubbias-two-group":
        base = dict(design="two_group", p_threshold=mag)
        base.update(overrides)
        return PubBiasSimConfig(**base)
    base = dict(design="exchangeable", censor_strength_c=mag)
    base.update(overrides)
    return PubBiasSimConfig(**base)


def _assess_replicate(scenario, cfg, rng, draws):
    if scenario == "batch-two-group":
        pair = simulate_batch_pair(cfg, rng)
        res = prior_prp(pair, sided="two")
        return (("prior_two_sided", res.p_value),)
    if scenario == "pubbias-two-group":
        pair = simulate_pubbias_dataset(cfg, rng)
        model = default_two_group_model(pair.original)
        two = prior_prp(pair, model=model, sided="two")
        try:
            ratio_p = prior_prp_pub_bias(pair, model=model).p_value
        except InputError:
            # Discrete outcomes can yield an exactly-zero original when
            # censoring is off; it carries no shrinkage direction.
            ratio_p = 1.0
        return (
            ("prior_two_sided", two.p_value),
            ("prior_shrinkage", ratio_p),
        )
    if scenario == "batch-exchangeable":
        studies = simulate_batch_dataset(cfg, rng)
        engine_seed = int(rng.integers(2**63))
        res = posterior_prp(
            studies, quantity=QUANTITY_Q, draws=draws, seed=engine_seed
        )
        return (("posterior_q", res.p_value),)
    studies = simulate_pubbias_dataset(cfg, rng)
    engine_seed = int(rng.integers(2**63))
    model = default_exchangeable_model(studies)
    q = posterior_prp(
        studies, model=model, quantity=QUANTITY_Q, draws=draws, seed=engine_seed
    )
    egger = posterior_prp(
        studies, model=model, quantity=QUANTITY_EGGER, draws=draws, seed=engine_seed
    )
    return (("posterior_q", q.p_value), ("posterior_egger", egger.p_value))
