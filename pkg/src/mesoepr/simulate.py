"""Monte Carlo measurement records from Gaussian states.

Two readouts are simulated:

* direct quadrature sampling at the ``(X, X)`` and ``(P, P)`` setting pairs;
* a linearized four-mode Schwinger-spin readout. Each signal mode is mixed
  with a local oscillator of mean intensity ``E**2``, an analyzer at angle
  ``theta`` selects ``cos(theta) X + sin(theta) P``, and the two output arms
  are counted. The spin outcome ``(n_plus - n_minus) / 2`` equals ``E x / 2``
  up to integer rounding.

Shots are generated in fixed-size blocks, each with its own seed stream keyed
by block index, so serial and threaded runs give identical records.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import SampleRecord, Setting
from .errors import RegimeViolation, ValidationError
from .gaussian import GaussianTwoModeState, sample_normal

BLOCK_SIZE = 1 << 16
MIN_LO_INTENSITY = 10.0
LINEAR_REGIME_LO = 1e4

_QUADRATURE_STREAM = {Setting.X: 0, Setting.P: 1}
_SCHWINGER_STREAM = 2
ANGLE = {Setting.X: 0.0, Setting.P: math.pi / 2}


@dataclass(frozen=True)
class HomodyneConfig:
    lo_intensity: float
    theta_a: float = 0.0
    theta_b: float = 0.0
    shots: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.lo_intensity) and self.lo_intensity >= MIN_LO_INTENSITY):
            raise RegimeViolation(
                f"lo_intensity must be >= {MIN_LO_INTENSITY:g} for the linearized readout, "
                f"got {self.lo_intensity!r}"
            )
        if self.lo_intensity < LINEAR_REGIME_LO:
            warnings.warn(
                f"lo_intensity={self.lo_intensity:g} is below {LINEAR_REGIME_LO:g}; "
                "integer rounding is no longer negligible",
                stacklevel=2,
            )
        if int(self.shots) < 1:
            raise ValidationError(f"shots must be >= 1, got {self.shots!r}")
        if int(self.seed) < 0:
            raise ValidationError("seed must be nonnegative")

    @property
    def amplitude(self) -> float:
        """``E``, the square root of the LO intensity."""
        return math.sqrt(self.lo_intensity)


@dataclass(frozen=True)
class CountRecord:
    n_plus_a: int
    n_minus_a: int
    n_plus_b: int
    n_minus_b: int

    @property
    def spin_a(self) -> float:
        return (self.n_plus_a - self.n_minus_a) / 2

    @property
    def spin_b(self) -> float:
        return (self.n_plus_b - self.n_minus_b) / 2


def _blocks(n: int):
    for k, start in enumerate(range(0, n, BLOCK_SIZE)):
        yield k, min(BLOCK_SIZE, n - start)


def _run_blocks(fn, n: int, workers: int) -> np.ndarray:
    jobs = list(_blocks(n))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(k, size) for k, size in jobs]
    return np.concatenate(parts, axis=0)


def sample_quadrature_pairs(
    s: GaussianTwoModeState, setting: Setting | str, n: int, seed: int = 0, workers: int = 1
) -> np.ndarray:
    """``(n, 2)`` draws of (Alice, Bob) outcomes at a matched quadrature setting."""
    setting = Setting(setting)
    s.check_physical()
    mean, cov = s.marginal(setting)
    stream = _QUADRATURE_STREAM[setting]

    def block(k, size):
        rng = np.random.default_rng([int(seed), stream, k])
        return sample_normal(mean, cov, size, rng)

    return _run_blocks(block, int(n), workers)


def sample_quadrature_records(
    s: GaussianTwoModeState, n_per_setting: int, seed: int = 0, workers: int = 1
) -> list[SampleRecord]:
    """``n_per_setting`` records at ``(X, X)`` followed by as many at ``(P, P)``."""
    if int(n_per_setting) < 1:
        raise ValidationError("n_per_setting must be >= 1")
    records = []
    for setting in (Setting.X, Setting.P):
        pairs = sample_quadrature_pairs(s, setting, n_per_setting, seed, workers)
        records.extend(SampleRecord(setting, setting, a, b) for a, b in pairs.tolist())
    return records


def schwinger_counts(
    s: GaussianTwoModeState, cfg: HomodyneConfig, workers: int = 1
) -> np.ndarray:
    """Integer counts ``(n_plus_a, n_minus_a, n_plus_b, n_minus_b)``, shape ``(shots, 4)``."""
    s.check_physical()
    mean, cov = s.rotated_marginal(cfg.theta_a, cfg.theta_b)
    amp = cfg.amplitude

    def block(k, size):
        rng = np.random.default_rng([int(cfg.seed), _SCHWINGER_STREAM, k])
        quad = sample_normal(mean, cov, size, rng)
        spin = 0.5 * amp * quad
        total = rng.poisson(cfg.lo_intensity, size=(size, 2)).astype(float)
        plus = np.rint((total + 2.0 * spin) / 2.0)
        minus = np.rint((total - 2.0 * spin) / 2.0)
        out = np.empty((size, 4), dtype=np.int64)
        out[:, 0::2] = np.clip(plus, 0, None)
        out[:, 1::2] = np.clip(minus, 0, None)
        return out

    return _run_blocks(block, int(cfg.shots), workers)


def simulate_schwinger_counts(
    s: GaussianTwoModeState, cfg: HomodyneConfig, workers: int = 1
) -> list[CountRecord]:
    return [CountRecord(*row) for row in schwinger_counts(s, cfg, workers).tolist()]


def spin_outcomes(counts: np.ndarray) -> np.ndarray:
    """``(J_A, J_B)`` per shot from a count array."""
    counts = np.asarray(counts)
    return 0.5 * np.stack([counts[:, 0] - counts[:, 1], counts[:, 2] - counts[:, 3]], axis=1)


def estimate_jx_mean(counts: np.ndarray, site: str = "b") -> float:
    """``|<J^X>|`` estimated as half the mean total count at a site."""
    counts = np.asarray(counts)
    cols = slice(2, 4) if site == "b" else slice(0, 2)
    return float(counts[:, cols].sum(axis=1).mean() / 2.0)
