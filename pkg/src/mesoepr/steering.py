"""delta-scopic EPR steering parameters.

``epsilon`` is the product of Bob's two inference standard deviations; an
EPR paradox (steering of B) is shown when it drops below 1. ``epsilon_delta``
inflates each inference variance to allow Alice's measurement to shift Bob's
outcome by up to ``delta``; ``epsilon_delta < 1`` rules out delta-scopic local
realism. Under a Gaussian conditional, and with equal X and P spreads, the
inflated product has the closed form ``sigma**2 + delta**2 + 2*delta*sigma*sqrt(2/pi)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .distributions import (
    BinningPolicy,
    InferenceStats,
    JointDistribution,
    SampleRecord,
    Setting,
    delta_inflated_variance,
    inference_stats,
)
from .errors import (
    DeltaTooLarge,
    EpsilonOutOfRange,
    NegativeDelta,
    NoMatchingRecords,
    NonPositiveJx,
    ValidationError,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
# threshold formula is real up to here; the threshold itself is already 0 from delta = 1
DELTA_MAX = 1.0 / math.sqrt(1.0 - 2.0 / math.pi)


@dataclass(frozen=True)
class DeltaLRParams:
    delta_x: float = 0.0
    delta_p: float = 0.0

    def __post_init__(self):
        for name in ("delta_x", "delta_p"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            if value < 0:
                raise NegativeDelta(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def symmetric(cls, delta: float) -> "DeltaLRParams":
        return cls(delta, delta)


@dataclass(frozen=True)
class SchwingerConfig:
    """Readout scale of a Schwinger-spin measurement at Bob's site.

    ``jx_mean`` is the measured ``|<J_B^X>|``; ``lo_intensity`` the mean local
    oscillator particle number. In the weak-signal regime ``jx_mean`` is close
    to ``lo_intensity / 2``; a warning is raised when they disagree by more
    than 10%.
    """

    jx_mean: float
    lo_intensity: float

    def __post_init__(self):
        if not (self.jx_mean > 0 and math.isfinite(self.jx_mean)):
            raise NonPositiveJx(f"jx_mean must be positive, got {self.jx_mean!r}")
        if not (self.lo_intensity > 0 and math.isfinite(self.lo_intensity)):
            raise ValidationError(f"lo_intensity must be positive, got {self.lo_intensity!r}")
        if not self.is_consistent():
            warnings.warn(
                f"jx_mean={self.jx_mean:g} differs from lo_intensity/2={self.lo_intensity / 2:g} "
                "by more than 10%",
                stacklevel=2,
            )

    @classmethod
    def from_jx(cls, jx_mean: float) -> "SchwingerConfig":
        return cls(jx_mean, 2.0 * jx_mean)

    @classmethod
    def from_lo(cls, lo_intensity: float) -> "SchwingerConfig":
        return cls(lo_intensity / 2.0, lo_intensity)

    def is_consistent(self, rtol: float = 0.1) -> bool:
        return abs(self.jx_mean - self.lo_intensity / 2.0) <= rtol * (self.lo_intensity / 2.0)

    @property
    def spin_shot_noise(self) -> float:
        """``|<J^X>| / 2``: the spin variance that normalizes to unit quadrature variance."""
        return self.jx_mean / 2.0


@dataclass
class SteeringReport:
    epsilon: float
    epsilon_delta: list[tuple[float, float]]
    critical_delta: float | None
    gaussian_assumed: bool
    delta_j: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epsilon_delta = sorted((float(d), float(v)) for d, v in self.epsilon_delta)
        values = [v for _, v in self.epsilon_delta]
        if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
            raise ValidationError("epsilon_delta must be nondecreasing in delta")

    @property
    def epr_paradox(self) -> bool:
        return self.epsilon < 1.0

    def verdicts(self) -> list[tuple[float, bool]]:
        """``(delta, nonlocal)`` for each evaluated delta; nonlocal iff epsilon_delta < 1."""
        return [(d, v < 1.0) for d, v in self.epsilon_delta]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["epsilon_delta"] = [
            {"delta": d, "value": v, "nonlocal": v < 1.0} for d, v in self.epsilon_delta
        ]
        out["epr_paradox"] = self.epr_paradox
        return out


def epsilon(sx: InferenceStats, sp: InferenceStats) -> float:
    return math.sqrt(sx.var_inf) * math.sqrt(sp.var_inf)


def epsilon_delta_general(sx: InferenceStats, sp: InferenceStats, d: DeltaLRParams) -> float:
    """Inflated steering product for arbitrary (not necessarily Gaussian) statistics."""
    return math.sqrt(delta_inflated_variance(sx, d.delta_x)) * math.sqrt(
        delta_inflated_variance(sp, d.delta_p)
    )


def epsilon_delta_gaussian(sigma: float, delta: float) -> float:
    """Closed form for Gaussian conditionals with equal spreads ``sigma`` and equal ``delta``."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    if delta < 0:
        raise NegativeDelta(f"delta must be >= 0, got {delta!r}")
    return sigma**2 + delta**2 + 2.0 * delta * sigma * SQRT_2_OVER_PI


def threshold_epsilon(delta: float) -> float:
    """Largest epsilon (Gaussian, symmetric case) that still shows delta-scopic nonlocality.

    Zero for ``delta >= 1``: no state qualifies there.
    """
    if delta < 0:
        raise NegativeDelta(f"delta must be >= 0, got {delta!r}")
    radicand = 2.0 * delta**2 / math.pi - (delta**2 - 1.0)
    if radicand < 0:
        raise DeltaTooLarge(f"delta={delta!r} exceeds {DELTA_MAX:.6f}; no Gaussian state qualifies")
    root = -delta * SQRT_2_OVER_PI + math.sqrt(radicand)
    # for delta >= 1 the bracket is <= 0: epsilon_delta >= delta**2 >= 1 for every state
    return root * root if root > 0 else 0.0


def critical_delta(eps: float) -> float:
    """Largest delta at which a Gaussian state with parameter ``eps`` is still delta-scopic nonlocal.

    Nonnegative root of ``sigma**2 + delta**2 + 2*delta*sigma*sqrt(2/pi) = 1`` with
    ``sigma = sqrt(eps)``.
    """
    if not (0.0 < eps <= 1.0):
        raise EpsilonOutOfRange(f"eps must lie in (0, 1], got {eps!r}")
    b = math.sqrt(eps) * SQRT_2_OVER_PI
    # rationalized -b + sqrt(b^2 + 1 - eps); no cancellation near eps = 1
    return (1.0 - eps) / (b + math.sqrt(b * b + 1.0 - eps))


def critical_delta_general(sx: InferenceStats, sp: InferenceStats) -> float | None:
    """Symmetric delta at which ``epsilon_delta_general`` reaches 1, or ``None`` if epsilon >= 1."""
    if epsilon(sx, sp) >= 1.0:
        return None

    def gap(delta):
        return epsilon_delta_general(sx, sp, DeltaLRParams(delta, delta)) - 1.0

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
    return brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-14)


def schwinger_normalize(
    jz_stats: InferenceStats, jy_stats: InferenceStats, cfg: SchwingerConfig
) -> tuple[InferenceStats, InferenceStats]:
    """Convert spin (particle-unit) stats to dimensionless quadrature stats.

    Dividing spin outcomes by ``sqrt(|<J^X>| / 2)`` maps the spin uncertainty
    bound onto ``Delta X Delta P >= 1``.
    """
    if not cfg.jx_mean > 0:
        raise NonPositiveJx("jx_mean must be positive")
    factor = 1.0 / math.sqrt(cfg.spin_shot_noise)
    return jz_stats.scaled(factor), jy_stats.scaled(factor)


def delta_j(delta: float, cfg: SchwingerConfig) -> float:
    """delta expressed in particle units: ``delta * sqrt(|<J^X>| / 2)``."""
    if delta < 0:
        raise NegativeDelta(f"delta must be >= 0, got {delta!r}")
    return delta * math.sqrt(cfg.spin_shot_noise)


def build_report(
    sx: InferenceStats,
    sp: InferenceStats,
    deltas: Iterable[float],
    gaussian: bool = False,
    schwinger: SchwingerConfig | None = None,
    metadata: dict | None = None,
) -> SteeringReport:
    """Evaluate epsilon, epsilon_delta over ``deltas`` and the critical delta.

    ``sx`` and ``sp`` must already be dimensionless. With ``gaussian=True``
    the symmetric closed form is used, with ``sigma = sqrt(epsilon)``.
    """
    eps = epsilon(sx, sp)
    deltas = sorted(set(float(d) for d in deltas))
    if gaussian:
        sigma = math.sqrt(eps)
        if sigma == 0:
            raise ValidationError("Gaussian shortcut needs a nonzero epsilon")
        curve = [(d, epsilon_delta_gaussian(sigma, d)) for d in deltas]
        crit = critical_delta(eps) if eps <= 1.0 else None
    else:
        curve = [(d, epsilon_delta_general(sx, sp, DeltaLRParams(d, d))) for d in deltas]
        crit = critical_delta_general(sx, sp)
    dj = delta_j(crit, schwinger) if (schwinger is not None and crit is not None) else None
    return SteeringReport(eps, curve, crit, bool(gaussian), dj, dict(metadata or {}))


_SETTING_CODES = {0: Setting.X, 1: Setting.P}


def records_to_array(records: Iterable[SampleRecord]) -> np.ndarray:
    """Encode records as an ``(n, 4)`` array ``[setting_a, setting_b, outcome_a, outcome_b]``, X=0, P=1."""
    code = {Setting.X: 0.0, Setting.P: 1.0}
    rows = [(code[r.setting_a], code[r.setting_b], r.outcome_a, r.outcome_b) for r in records]
    return np.asarray(rows, dtype=float).reshape(-1, 4)


class SteeringEstimator(BaseEstimator):
    """Estimate steering parameters from raw joint measurement records.

    ``X`` is either a list of :class:`SampleRecord` or an ``(n, 4)`` array with
    columns ``setting_a, setting_b, outcome_a, outcome_b`` (settings coded
    X=0, P=1). Rows at ``(X, X)`` and ``(P, P)`` are used.

    With ``jx_mean`` set, outcomes are taken to be spin values in particle
    units and are normalized before any parameter is computed.
    """

    def __init__(self, bins=100, span=5.0, bessel=False, deltas=None, gaussian=False,
                 jx_mean=None, lo_intensity=None):
        self.bins = bins
        self.span = span
        self.bessel = bessel
        self.deltas = deltas
        self.gaussian = gaussian
        self.jx_mean = jx_mean
        self.lo_intensity = lo_intensity

    def _schwinger_config(self):
        if self.jx_mean is None:
            if self.lo_intensity is None:
                return None
            return SchwingerConfig.from_lo(self.lo_intensity)
        lo = self.lo_intensity if self.lo_intensity is not None else 2.0 * self.jx_mean
        return SchwingerConfig(self.jx_mean, lo)

    def fit(self, X, y=None):
        if not isinstance(X, np.ndarray) and len(X) and isinstance(X[0], SampleRecord):
            X = records_to_array(X)
        X = check_array(X)
        if X.shape[1] != 4:
            raise ValueError(f"expected 4 columns, got {X.shape[1]}")
        policy = BinningPolicy.uniform(self.bins, self.span)
        stats = {}
        for code, setting in _SETTING_CODES.items():
            rows = X[(X[:, 0] == code) & (X[:, 1] == code)]
            if len(rows) < 2:
                raise NoMatchingRecords(f"{len(rows)} record(s) at ({setting.value}, {setting.value})")
            joint = JointDistribution.from_samples(rows[:, 2], rows[:, 3], policy)
            stats[setting] = inference_stats(joint, bessel=self.bessel)
        self.schwinger_ = self._schwinger_config()
        sx, sp = stats[Setting.X], stats[Setting.P]
        self.raw_stats_ = (sx, sp)
        if self.schwinger_ is not None:
            sx, sp = schwinger_normalize(sx, sp, self.schwinger_)
        self.stats_x_, self.stats_p_ = sx, sp
        deltas = self.deltas if self.deltas is not None else default_deltas()
        self.report_ = build_report(sx, sp, deltas, gaussian=self.gaussian, schwinger=self.schwinger_)
        self.epsilon_ = self.report_.epsilon
        self.critical_delta_ = self.report_.critical_delta
        return self

    def epsilon_delta(self, delta: float | Sequence[float]):
        """Inflated steering product at ``delta`` using the fitted statistics."""
        check_is_fitted(self, "report_")
        scalar = np.ndim(delta) == 0
        values = []
        for d in np.atleast_1d(delta):
            if self.gaussian:
                values.append(epsilon_delta_gaussian(math.sqrt(self.epsilon_), float(d)))
            else:
                values.append(epsilon_delta_general(self.stats_x_, self.stats_p_, DeltaLRParams(d, d)))
        return values[0] if scalar else np.asarray(values)

    def predict(self, deltas):
        """True where delta-scopic nonlocality is shown (epsilon_delta < 1)."""
        return np.atleast_1d(self.epsilon_delta(np.atleast_1d(deltas))) < 1.0


def default_deltas() -> list[float]:
    return [round(0.1 * k, 10) for k in range(17)]
