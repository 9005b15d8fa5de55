"""Monte Carlo replication assessment for exchangeable study sets.

The reference model is conditioned on all observed estimates at once; a
replication p-value is then the posterior-predictive probability that a
rerun of every study would look at least as discrepant as the observed
data, judged by a chosen test quantity.  Each Monte Carlo draw walks the
hierarchy top-down: pick a component, draw the shared mean from its
conjugate normal posterior, draw per-study effects around it, then draw
fresh estimates with the same standard errors.  Quantities are evaluated
at both the observed and the redrawn estimates under that draw's
parameters, and the p-value is the fraction of draws where the redrawn
discrepancy reaches the observed one (ties count).

Determinism: draws are produced in fixed-size chunks, each chunk seeded by
a substream spawned from (seed, chunk index), with a fixed sequence of
generator calls inside a chunk.  The result is bit-identical for a given
(seed, draws) no matter how many threads execute the chunks.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import default_exchangeable_model
from .model import ConfigError, InputError, NumericDegeneracyError, PrpResult
from .special import log_sum_exp

CHUNK_SIZE = 1000
DEFAULT_DRAWS = 10_000
DEFAULT_SEED = 42

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PosteriorDraw:
    """One joint draw of latent parameters and replicated estimates."""

    component: int
    beta_bar: float
    effects: tuple[float, ...]
    replicated: tuple[float, ...]


def marginal_loglik(studies, omega_sq, phi_sq):
    """Log marginal density of the observed estimates under one component.

    The estimates are jointly normal with mean zero and covariance
    diag(se_i^2 + phi_sq) + omega_sq * ones * ones^T.  The rank-one
    structure gives the determinant and quadratic form in O(m):

        det = (prod d_i) * (1 + omega_sq * sum 1/d_i)
        x' Sigma^{-1} x = sum x_i^2/d_i
                          - omega_sq * (sum x_i/d_i)^2 / (1 + omega_sq * sum 1/d_i)

    with d_i = se_i^2 + phi_sq.  omega_sq = 0 reduces to independent
    normals with no special casing.
    """
    x = np.asarray([s.beta_hat for s in studies], dtype=float)
    d = np.asarray([s.var for s in studies], dtype=float) + phi_sq
    inv_d = 1.0 / d
    s = inv_d.sum()
    denom = 1.0 + omega_sq * s
    quad = (x * x * inv_d).sum() - omega_sq * (x * inv_d).sum() ** 2 / denom
    logdet = np.log(d).sum() + np.log(denom)
    return -0.5 * (len(x) * _LOG_2PI + logdet + quad)


def component_posterior(studies, model):
    """Posterior probability of each mixture component given the data."""
    logs = [
        np.log(c.weight) + marginal_loglik(studies, c.omega_sq, c.phi_sq)
        for c in model.components
    ]
    total = log_sum_exp(logs)
    return tuple(float(np.exp(l - total)) for l in logs)


@dataclass(frozen=True)
class TestQuantity:
    """A discrepancy measure T(estimates, shared mean, heterogeneity).

    ``batch`` evaluates T for a block of draws at once: it takes an (n, m)
    estimate matrix, the (m,) squared standard errors, and per-draw (n,)
    vectors of the shared mean and heterogeneity variance, returning an
    (n,) vector.  ``comparison`` declares how replicated values are judged
    against observed ones: "greater_equal" for one-sided quantities,
    "abs_greater_equal" for sign-free ones.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    name: str
    batch: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    comparison: str
    min_studies: int = 2
    extra_check: Callable | None = None

    def __post_init__(self):
        if self.comparison not in ("greater_equal", "abs_greater_equal"):
            raise ConfigError(f"unknown comparison {self.comparison!r}")

    def validate(self, studies):
        if len(studies) < self.min_studies:
            raise InputError(
                f"quantity {self.name!r} needs at least {self.min_studies} studies, "
                f"got {len(studies)}"
            )
        if self.extra_check is not None:
            self.extra_check(studies)

    def evaluate(self, beta_hats, ses, beta_bar, phi_sq):
        """Scalar evaluation for a single parameter setting."""
        beta = np.asarray(beta_hats, dtype=float)[None, :]
        ses_sq = np.asarray(ses, dtype=float) ** 2
        out = self.batch(
            beta, ses_sq, np.asarray([beta_bar]), np.asarray([phi_sq])
        )
        return float(out[0])


def _q_batch(beta, ses_sq, beta_bar, phi_sq):
    w = 1.0 / (ses_sq[None, :] + phi_sq[:, None])
    dev = beta - beta_bar[:, None]
    return (w * dev * dev).sum(axis=1)


def _egger_batch(beta, ses_sq, beta_bar, phi_sq):
    # Weighted regression of the estimates on their heterogeneity-widened
    # standard errors; the slope's t-statistic measures funnel asymmetry.
    x = np.sqrt(ses_sq[None, :] + phi_sq[:, None])
    w = 1.0 / (x * x)
    m = beta.shape[1]
    sw = w.sum(axis=1)
    swx = (w * x).sum(axis=1)
    swy = (w * beta).sum(axis=1)
    swxx = (w * x * x).sum(axis=1)
    swxy = (w * x * beta).sum(axis=1)
    swyy = (w * beta * beta).sum(axis=1)
    denom = sw * swxx - swx * swx
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (sw * swxy - swx * swy) / denom
        intercept = (swy - slope * swx) / sw
        resid = beta - intercept[:, None] - slope[:, None] * x
        sigma2 = (w * resid * resid).sum(axis=1) / (m - 2)
        t = slope / np.sqrt(sigma2 * sw / denom)
        # Estimate variation below these sums' cancellation noise floor
        # (~1e-6 relative) leaves slope and residuals both at roundoff
        # scale; their ratio is noise, and the funnel is flat.
        tss = swyy - swy * swy / sw
    return np.where(tss <= 1e-12 * swyy, 0.0, t)


def _check_distinct_ses(studies):
    ses = {s.se for s in studies}
    if len(ses) < 2:
        raise NumericDegeneracyError(
            "funnel-asymmetry quantity is undefined when all standard errors "
            "are identical (regressor has zero variance)"
        )


QUANTITY_Q = TestQuantity(
    name="q", batch=_q_batch, comparison="greater_equal", min_studies=2
)
QUANTITY_EGGER = TestQuantity(
    name="egger",
    batch=_egger_batch,
    comparison="abs_greater_equal",
    min_studies=3,
    extra_check=_check_distinct_ses,
)

_QUANTITIES = {"q": QUANTITY_Q, "egger": QUANTITY_EGGER}


def get_quantity(name):
    try:
        return _QUANTITIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown test quantity {name!r}; choose from {sorted(_QUANTITIES)}"
        ) from None


def quantity_q(beta_hats, ses, beta_bar, phi_sq):
    """Precision-weighted spread of estimates around a given shared mean."""
    return QUANTITY_Q.evaluate(beta_hats, ses, beta_bar, phi_sq)


def quantity_egger(beta_hats, ses, beta_bar, phi_sq):
    """Slope t-statistic of estimates regressed on widened standard errors."""
    return QUANTITY_EGGER.evaluate(beta_hats, ses, beta_bar, phi_sq)


class _Prepared:
    """Per-dataset arrays shared read-only across draw chunks."""

    def __init__(self, studies, model):
        self.beta = np.asarray([s.beta_hat for s in studies], dtype=float)
        self.var = np.asarray([s.var for s in studies], dtype=float)
        self.ses_sq = self.var
        self.m = len(studies)
        self.omega_sq = np.asarray([c.omega_sq for c in model.components])
        self.phi_sq = np.asarray([c.phi_sq for c in model.components])
        self.post_k = np.asarray(component_posterior(studies, model))
        # Cumulative weights for inverse-CDF component selection; pin the
        # last entry so a uniform draw of exactly 1.0 - eps stays in range.
        self.cum_k = np.cumsum(self.post_k)
        self.cum_k[-1] = 1.0
        # Conjugate posterior of the shared mean within each component.
        d = self.var[None, :] + self.phi_sq[:, None]
        s = (1.0 / d).sum(axis=1)
        num = (self.beta[None, :] / d).sum(axis=1)
        mean = np.zeros(len(self.omega_sq))
        variance = np.zeros(len(self.omega_sq))
        positive = self.omega_sq > 0.0
        prec = 1.0 / self.omega_sq[positive] + s[positive]
        mean[positive] = num[positive] / prec
        variance[positive] = 1.0 / prec
        self.mean_bar = mean
        self.var_bar = variance
        # Per-study conditional coefficients: effect | shared mean is
        # normal with mean A*bar + B and variance A*phi_sq, which
        # collapses to the shared mean itself when phi_sq = 0.
        tot = self.var[None, :] + self.phi_sq[:, None]
        self.coef_a = self.var[None, :] / tot
        self.coef_b = self.beta[None, :] * self.phi_sq[:, None] / tot
        self.cond_var = self.coef_a * self.phi_sq[:, None]


def _draw_chunk(prep, quantity, seed, chunk_index, size):
    """Sample one chunk of draws; returns (hits, sum of observed T)."""
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    )
    # Fixed call order: component uniform, shared-mean normal, effect
    # normals, replication normals.  Never reorder; determinism depends
    # on it.
    u = rng.random(size)
    z_bar = rng.standard_normal(size)
    z_eff = rng.standard_normal((size, prep.m))
    z_rep = rng.standard_normal((size, prep.m))

    k = np.searchsorted(prep.cum_k, u, side="right")
    beta_bar = prep.mean_bar[k] + np.sqrt(prep.var_bar[k]) * z_bar
    effects = (
        prep.coef_a[k] * beta_bar[:, None]
        + prep.coef_b[k]
        + np.sqrt(prep.cond_var[k]) * z_eff
    )
    replicated = effects + np.sqrt(prep.var)[None, :] * z_rep

    phi = prep.phi_sq[k]
    obs = np.broadcast_to(prep.beta, (size, prep.m))
    t_obs = quantity.batch(obs, prep.ses_sq, beta_bar, phi)
    t_rep = quantity.batch(replicated, prep.ses_sq, beta_bar, phi)
    if quantity.comparison == "abs_greater_equal":
        hits = np.abs(t_rep) >= np.abs(t_obs)
    else:
        hits = t_rep >= t_obs
    return int(hits.sum()), float(t_obs.sum())


def sample_posterior_draw(studies, model, rng):
    """One joint draw from the conditioned reference model.

    Follows the same hierarchy as the chunked engine: component from the
    data-conditioned mixture weights, shared mean from its conjugate
    normal, effects around the shared mean, replicated estimates around
    the effects with the observed standard errors.
    """
    prep = _Prepared(studies, model)
    k = int(np.searchsorted(prep.cum_k, rng.random(), side="right"))
    beta_bar = prep.mean_bar[k] + np.sqrt(prep.var_bar[k]) * rng.standard_normal()
    effects = (
        prep.coef_a[k] * beta_bar
        + prep.coef_b[k]
        + np.sqrt(prep.cond_var[k]) * rng.standard_normal(prep.m)
    )
    replicated = effects + np.sqrt(prep.var) * rng.standard_normal(prep.m)
    return PosteriorDraw(
        component=k,
        beta_bar=float(beta_bar),
        effects=tuple(float(v) for v in effects),
        replicated=tuple(float(v) for v in replicated),
    )


def _worker_count(n_chunks):
    env = os.environ.get("PRP_THREADS")
    if env is None:
        cap = min(os.cpu_count() or 1, 8)
    else:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"PRP_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError(f"PRP_THREADS must be >= 1, got {cap}")
    return max(1, min(cap, n_chunks))


def posterior_prp(
    studies,
    model=None,
    quantity=QUANTITY_Q,
    draws=DEFAULT_DRAWS,
    seed=DEFAULT_SEED,
    smoothed=False,
):
    """Posterior-predictive replication p-value for an exchangeable dataset.

    p is the fraction of ``draws`` whose replicated quantity reaches the
    observed one (inclusive, so a constant quantity gives p = 1).  With
    ``smoothed`` the estimator (hits + 1) / (draws + 1) is used instead,
    which avoids exact zeros at slight conservative cost.
    """
    studies = list(studies)
    if isinstance(quantity, str):
        quantity = get_quantity(quantity)
    quantity.validate(studies)
    if len(studies) < 2:
        raise InputError(f"need at least 2 studies, got {len(studies)}")
    if draws < 1:
        raise ConfigError(f"draws must be >= 1, got {draws}")
    if model is None:
        model = default_exchangeable_model(studies)

    prep = _Prepared(studies, model)
    sizes = [CHUNK_SIZE] * (draws // CHUNK_SIZE)
    if draws % CHUNK_SIZE:
        sizes.append(draws % CHUNK_SIZE)
    jobs = list(enumerate(sizes))
    workers = _worker_count(len(jobs))
    if workers == 1:
        results = [_draw_chunk(prep, quantity, seed, c, n) for c, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda job: _draw_chunk(prep, quantity, seed, *job), jobs)
            )
    hits = sum(r[0] for r in results)
    t_obs_sum = sum(r[1] for r in results)

    if smoothed:
        p = (hits + 1.0) / (draws + 1.0)
    else:
        p = hits / draws
    sidedness = "two" if quantity.comparison == "abs_greater_equal" else "high"
    return PrpResult(
        p_value=p,
        sidedness=sidedness,
        statistic_name=quantity.name,
        statistic_value=t_obs_sum / draws,
        component_posteriors=tuple(float(v) for v in prep.post_k),
        mc_stderr=float(np.sqrt(p * (1.0 - p) / draws)),
        draws=draws,
        seed=seed,
    )
