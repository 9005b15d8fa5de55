"""Core data model: study summaries, the reference mixture model, results.

The reference model is a finite mixture of hierarchical normal components.
Each component fixes a between-study variance ``omega_sq`` (variance of the
shared mean across hypothetical replications) and a within-study
heterogeneity variance ``phi_sq`` (study-specific departures from that
shared mean).  A component with ``phi_sq == 0`` is perfectly homogeneous;
one with ``omega_sq == 0`` pins the shared mean at zero.
"""

from dataclasses import dataclass, field


class InputError(ValueError):
    """Raised when user-supplied data is malformed or out of domain."""


class NumericDegeneracyError(ArithmeticError):
    """Raised when a computation cannot proceed on numerically degenerate input."""


class ConfigError(ValueError):
    """Raised when requested options are inconsistent or unsupported."""


class InfeasibleCensoringError(RuntimeError):
    """Raised when selection-biased simulation cannot produce a dataset
    within the configured attempt budget."""


@dataclass(frozen=True)
class StudySummary:
    """One study's estimated effect and its standard error."""

    study_id: str
    beta_hat: float
    se: float

    def __post_init__(self):
        if not (self.se > 0.0):
            raise InputError(
                f"study {self.study_id!r}: standard error must be positive, got {self.se}"
            )
        if not _is_finite(self.beta_hat):
            raise InputError(
                f"study {self.study_id!r}: effect estimate must be finite, got {self.beta_hat}"
            )
        if not _is_finite(self.se):
            raise InputError(
                f"study {self.study_id!r}: standard error must be finite, got {self.se}"
            )

    @property
    def var(self):
        return self.se * self.se


@dataclass(frozen=True)
class ReplicationPair:
    """An original study and its direct replication."""

    original: StudySummary
    replication: StudySummary


@dataclass(frozen=True)
class HyperComponent:
    """One mixture component of the reference model.

    Parameters
    ----------
    omega_sq : float
        Variance of the shared underlying mean.
    phi_sq : float
        Between-study heterogeneity variance around the shared mean.
    gamma : float
        Heterogeneity fraction phi_sq / (phi_sq + omega_sq) the component
        was built from (kept for reporting; 0 when omega_sq + phi_sq == 0).
    weight : float
        Prior mixture weight.
    """

    omega_sq: float
    phi_sq: float
    gamma: float
    weight: float

    def __post_init__(self):
        if self.omega_sq < 0.0 or self.phi_sq < 0.0:
            raise ConfigError(
                f"component variances must be nonnegative, got "
                f"omega_sq={self.omega_sq}, phi_sq={self.phi_sq}"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not (self.weight > 0.0):
            raise ConfigError(f"component weight must be positive, got {self.weight}")

    @property
    def total_var(self):
        return self.omega_sq + self.phi_sq


@dataclass(frozen=True)
class ReferenceModel:
    """Finite mixture over (omega_sq, phi_sq) hyperparameter settings."""

    components: tuple[HyperComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigError("reference model needs at least one component")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"component weights must sum to 1, got {total!r}")

    def __len__(self):
        return len(self.components)


def make_reference_model(pairs):
    """Build a ReferenceModel from (omega_sq, phi_sq) pairs, equally weighted.

    ``gamma`` is recovered as phi_sq / (phi_sq + omega_sq) for reporting.
    """
    pairs = list(pairs)
    if not pairs:
        raise ConfigError("reference model needs at least one component")
    w = 1.0 / len(pairs)
    comps = []
    for omega_sq, phi_sq in pairs:
        total = omega_sq + phi_sq
        gamma = phi_sq / total if total > 0.0 else 0.0
        comps.append(
            HyperComponent(omega_sq=omega_sq, phi_sq=phi_sq, gamma=gamma, weight=w)
        )
    return ReferenceModel(components=tuple(comps))


@dataclass(frozen=True)
class PrpResult:
    """Outcome of a replication p-value assessment.

    ``component_posteriors`` aligns with the reference model's components
    and records how the data reweighted them.  ``mc_stderr`` and ``draws``
    are None for analytic (prior-predictive) assessments;
    ``predictive_interval`` is None for posterior-predictive ones.
    """

    p_value: float
    sidedness: str
    statistic_name: str
    statistic_value: float
    component_posteriors: tuple[float, ...]
    mc_stderr: float | None = None
    draws: int | None = None
    predictive_interval: tuple[float, float] | None = None
    seed: int | None = None
    extras: dict = field(default_factory=dict)


def _is_finite(x):
    return x == x and x not in (float("inf"), float("-inf"))
