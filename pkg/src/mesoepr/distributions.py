"""Binned joint outcome distributions and inference statistics.

A :class:`JointDistribution` is a normalized 2-D histogram over one pair of
commuting observables (Alice's outcome on axis ``a``, Bob's on axis ``b``).
From it we get the per-bin conditional moments of Bob's outcome, the average
conditional ("inference") variance, and the mean absolute deviation of Bob's
outcome about its conditional mean. Those two numbers are all the steering
layer needs.

All quantities are evaluated on bin centers. Empty Alice-bins carry no weight
and are skipped.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import DegenerateRange, NegativeDelta, NoMatchingRecords, ValidationError

NORMALIZATION_TOL = 1e-12


class Setting(str, enum.Enum):
    X = "X"
    P = "P"


@dataclass(frozen=True)
class SampleRecord:
    """One joint measurement: Alice's and Bob's settings and outcomes."""

    setting_a: Setting
    setting_b: Setting
    outcome_a: float
    outcome_b: float

    def __post_init__(self):
        object.__setattr__(self, "setting_a", Setting(self.setting_a))
        object.__setattr__(self, "setting_b", Setting(self.setting_b))
        for name in ("outcome_a", "outcome_b"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class BinningPolicy:
    """How outcomes are mapped to bins.

    By default each axis gets ``bins`` equal-width bins spanning
    ``mean +/- span * sd`` of the data on that axis; outcomes outside are
    clamped into the edge bins. Explicit ``edges_a`` / ``edges_b`` override
    the data-driven edges.
    """

    bins_a: int = 100
    bins_b: int = 100
    span: float = 5.0
    edges_a: tuple[float, ...] | None = None
    edges_b: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.bins_a) < 1 or int(self.bins_b) < 1:
            raise ValidationError("bin counts must be positive")
        if not (self.span > 0 and math.isfinite(self.span)):
            raise ValidationError("span must be a positive finite number")
        for name in ("edges_a", "edges_b"):
            edges = getattr(self, name)
            if edges is not None:
                edges = tuple(float(e) for e in edges)
                _check_edges(np.asarray(edges))
                object.__setattr__(self, name, edges)

    @classmethod
    def uniform(cls, bins: int = 100, span: float = 5.0) -> "BinningPolicy":
        return cls(bins_a=bins, bins_b=bins, span=span)

    def edges(self, values: np.ndarray, axis: str) -> np.ndarray:
        explicit = self.edges_a if axis == "a" else self.edges_b
        if explicit is not None:
            return np.asarray(explicit, dtype=float)
        n_bins = self.bins_a if axis == "a" else self.bins_b
        sd = float(np.std(values))
        if sd == 0.0 or not np.ptp(values) > 0:
            raise DegenerateRange(f"all outcomes on axis {axis!r} are identical")
        mu = float(np.mean(values))
        return np.linspace(mu - self.span * sd, mu + self.span * sd, int(n_bins) + 1)

    def edges_from_moments(self, mean: float, sd: float, axis: str) -> np.ndarray:
        explicit = self.edges_a if axis == "a" else self.edges_b
        if explicit is not None:
            return np.asarray(explicit, dtype=float)
        if not sd > 0:
            raise DegenerateRange(f"zero spread on axis {axis!r}")
        n_bins = self.bins_a if axis == "a" else self.bins_b
        return np.linspace(mean - self.span * sd, mean + self.span * sd, int(n_bins) + 1)


def _check_edges(edges: np.ndarray) -> None:
    if edges.ndim != 1 or edges.size < 2:
        raise ValidationError("need at least two bin edges")
    if not np.all(np.isfinite(edges)):
        raise ValidationError("bin edges must be finite")
    if not np.all(np.diff(edges) > 0):
        raise ValidationError("bin edges must be strictly increasing")


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class JointDistribution:
    edges_a: np.ndarray
    edges_b: np.ndarray
    prob: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        edges_a = _frozen(self.edges_a)
        edges_b = _frozen(self.edges_b)
        prob = _frozen(self.prob)
        _check_edges(edges_a)
        _check_edges(edges_b)
        if prob.shape != (edges_a.size - 1, edges_b.size - 1):
            raise ValidationError(
                f"prob shape {prob.shape} does not match edges "
                f"({edges_a.size - 1}, {edges_b.size - 1})"
            )
        if np.any(prob < 0) or not np.all(np.isfinite(prob)):
            raise ValidationError("probabilities must be finite and nonnegative")
        if abs(prob.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"probabilities sum to {prob.sum()!r}, not 1")
        if int(self.n_samples) < 0:
            raise ValidationError("n_samples must be nonnegative")
        object.__setattr__(self, "edges_a", edges_a)
        object.__setattr__(self, "edges_b", edges_b)
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def centers_a(self) -> np.ndarray:
        return 0.5 * (self.edges_a[1:] + self.edges_a[:-1])

    @property
    def centers_b(self) -> np.ndarray:
        return 0.5 * (self.edges_b[1:] + self.edges_b[:-1])

    def marginal_a(self) -> np.ndarray:
        m = self.prob.sum(axis=1)
        return m / m.sum()

    def marginal_b(self) -> np.ndarray:
        m = self.prob.sum(axis=0)
        return m / m.sum()

    @classmethod
    def from_samples(cls, a, b, policy: BinningPolicy | None = None) -> "JointDistribution":
        """Histogram paired samples, clamping out-of-range values into edge bins."""
        policy = policy or BinningPolicy()
        a = np.asarray(a, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        if a.shape != b.shape:
            raise ValidationError("a and b must have the same length")
        if a.size < 2:
            raise NoMatchingRecords(f"need at least 2 samples, got {a.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("samples must be finite")
        edges_a = policy.edges(a, "a")
        edges_b = policy.edges(b, "b")
        ia = _bin_index(a, edges_a)
        ib = _bin_index(b, edges_b)
        counts = np.zeros((edges_a.size - 1, edges_b.size - 1))
        np.add.at(counts, (ia, ib), 1.0)
        return cls(edges_a, edges_b, counts / a.size, n_samples=a.size)

    @classmethod
    def from_bivariate_normal(
        cls, mean, cov, policy: BinningPolicy | None = None, nodes: int = 16
    ) -> "JointDistribution":
        """Exact bin masses of a bivariate normal (tails clamped into edge bins).

        The integral over each Alice-bin is done by Gauss-Legendre quadrature
        of the marginal density times the conditional CDF differences.
        """
        policy = policy or BinningPolicy()
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        var_a, var_b, c_ab = cov[0, 0], cov[1, 1], cov[0, 1]
        if not var_a > 0:
            raise DegenerateRange("zero marginal variance on axis 'a'")
        cond_var = var_b - c_ab**2 / var_a
        if not cond_var > 0:
            raise DegenerateRange("conditional distribution of b is degenerate")
        sd_a = math.sqrt(var_a)
        edges_a = policy.edges_from_moments(mean[0], sd_a, "a")
        edges_b = policy.edges_from_moments(mean[1], math.sqrt(var_b), "b")

        # integration segments over a: each interior bin, plus 12-sd tails folded
        # into the outer bins
        lo = np.concatenate(([min(edges_a[0], mean[0] - 12 * sd_a)], edges_a[:-1], [edges_a[-1]]))
        hi = np.concatenate(([edges_a[0]], edges_a[1:], [max(edges_a[-1], mean[0] + 12 * sd_a)]))
        owner = np.concatenate(([0], np.arange(edges_a.size - 1), [edges_a.size - 2]))

        x, w = np.polynomial.legendre.leggauss(nodes)
        half = 0.5 * (hi - lo)
        pts = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
        wts = half[:, None] * w[None, :]
        dens = np.exp(-0.5 * ((pts - mean[0]) / sd_a) ** 2) / (sd_a * math.sqrt(2 * math.pi))
        cond_mean = mean[1] + c_ab / var_a * (pts - mean[0])
        z = (edges_b[None, None, 1:-1] - cond_mean[..., None]) / math.sqrt(cond_var)
        cdf = ndtr(z)
        ones = np.ones(cdf.shape[:-1] + (1,))
        cdf = np.concatenate((0 * ones, cdf, ones), axis=-1)
        cell = np.diff(cdf, axis=-1)
        seg_mass = np.einsum("sk,skj->sj", wts * dens, cell)
        prob = np.zeros((edges_a.size - 1, edges_b.size - 1))
        np.add.at(prob, owner, seg_mass)
        return cls(edges_a, edges_b, prob / prob.sum(), n_samples=0)


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, edges.size - 2)


@dataclass(frozen=True)
class InferenceStats:
    """Average conditional variance of Bob's outcome and the absolute-deviation term."""

    var_inf: float
    abs_dev: float
    n_effective: int = 0

    def __post_init__(self):
        for name in ("var_inf", "abs_dev"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and nonnegative, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "n_effective", int(self.n_effective))

    @classmethod
    def gaussian(cls, sigma: float, n_effective: int = 0) -> "InferenceStats":
        """Stats of a Gaussian conditional with standard deviation ``sigma``."""
        return cls(sigma**2, sigma * math.sqrt(2 / math.pi), n_effective)

    def scaled(self, factor: float) -> "InferenceStats":
        """Stats after rescaling the outcome by ``factor`` (> 0)."""
        return InferenceStats(self.var_inf * factor**2, self.abs_dev * factor, self.n_effective)


class ConditionalBin(NamedTuple):
    weight: float
    mean_b: float
    var_b: float


def build_joint(
    records: Iterable[SampleRecord],
    settings: Sequence[Setting | str],
    binning: BinningPolicy | None = None,
) -> JointDistribution:
    """Histogram the records measured at the given ``(setting_a, setting_b)`` pair."""
    want_a, want_b = Setting(settings[0]), Setting(settings[1])
    pairs = [(r.outcome_a, r.outcome_b) for r in records
             if r.setting_a is want_a and r.setting_b is want_b]
    if len(pairs) < 2:
        raise NoMatchingRecords(
            f"{len(pairs)} record(s) at setting pair ({want_a.value}, {want_b.value}); need >= 2"
        )
    arr = np.asarray(pairs, dtype=float)
    return JointDistribution.from_samples(arr[:, 0], arr[:, 1], binning)


def _conditional_arrays(d: JointDistribution, bessel: bool = False):
    prob = d.prob
    weight = prob.sum(axis=1)
    keep = weight > 0
    prob, weight = prob[keep], weight[keep]
    cb = d.centers_b
    mean_b = prob @ cb / weight
    dev = cb[None, :] - mean_b[:, None]
    var_b = np.einsum("ij,ij->i", prob, dev**2) / weight
    if bessel:
        if d.n_samples < 2:
            raise ValidationError("Bessel correction needs an empirical distribution")
        counts = np.rint(weight * d.n_samples)
        factor = np.where(counts > 1, counts / np.maximum(counts - 1, 1), 1.0)
        var_b = var_b * factor
    return prob, weight / weight.sum(), mean_b, var_b, dev


def conditional_moments(d: JointDistribution, bessel: bool = False) -> list[ConditionalBin]:
    """Weight, conditional mean and conditional variance of b for each nonempty a-bin."""
    _, weight, mean_b, var_b, _ = _conditional_arrays(d, bessel)
    return [ConditionalBin(float(w), float(m), float(v)) for w, m, v in zip(weight, mean_b, var_b)]


def inference_stats(d: JointDistribution, bessel: bool = False) -> InferenceStats:
    prob, weight, _, var_b, dev = _conditional_arrays(d, bessel)
    var_inf = float(weight @ var_b)
    abs_dev = float(np.sum(prob * np.abs(dev)) / prob.sum())
    return InferenceStats(var_inf, abs_dev, d.n_samples)


def delta_inflated_variance(s: InferenceStats, delta: float) -> float:
    """Inference variance allowing Alice's measurement to shift Bob's outcome by up to ``delta``.

    ``var_inf + delta**2 + 2 * delta * abs_dev``.
    """
    if delta < 0:
        raise NegativeDelta(f"delta must be >= 0, got {delta!r}")
    if delta == 0:
        return s.var_inf
    return s.var_inf + delta**2 + 2.0 * delta * s.abs_dev


class BinnedInferenceRegressor(RegressorMixin, BaseEstimator):
    """Histogram regressor of Bob's outcome on Alice's outcome.

    ``fit(X, y)`` takes Alice's outcomes as a single-feature ``X`` and Bob's
    outcomes as ``y``, bins them, and stores the inference statistics.
    ``predict`` returns the conditional mean of ``y`` for the bin each row of
    ``X`` falls into.

    Parameters
    ----------
    bins : int
        Bins per axis.
    span : float
        Half-width of the binned range in standard deviations.
    bessel : bool
        Apply the per-bin ``n / (n - 1)`` correction to conditional variances.

    Attributes
    ----------
    joint_ : JointDistribution
    stats_ : InferenceStats
    var_inf_ : float
    abs_dev_ : float
    """

    def __init__(self, bins=100, span=5.0, bessel=False):
        self.bins = bins
        self.span = span
        self.bessel = bessel

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature (Alice's outcome), got {X.shape[1]}")
        policy = BinningPolicy.uniform(self.bins, self.span)
        self.joint_ = JointDistribution.from_samples(X[:, 0], y, policy)
        self.stats_ = inference_stats(self.joint_, bessel=self.bessel)
        self.var_inf_ = self.stats_.var_inf
        self.abs_dev_ = self.stats_.abs_dev
        self.n_features_in_ = 1

        weight = self.joint_.prob.sum(axis=1)
        fallback = float(self.joint_.marginal_b() @ self.joint_.centers_b)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = self.joint_.prob @ self.joint_.centers_b / weight
        self.bin_means_ = np.where(weight > 0, means, fallback)
        return self

    def predict(self, X):
        check_is_fitted(self, "joint_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        return self.bin_means_[_bin_index(X[:, 0], self.joint_.edges_a)]
