"""Analytic two-mode Gaussian states.

Quadrature ordering is ``(X_A, P_A, X_B, P_B)`` with ``a = (X + iP) / 2``, so
``[X, P] = 2i`` and the vacuum covariance is the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import BinningPolicy, JointDistribution, Setting
from .errors import NonPhysicalState, OutOfRangeTransmission, SingularMarginal, ValidationError

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-10

# symplectic form for [X, P] = 2i, one 2x2 block per mode
OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))

_QUAD_INDEX = {Setting.X: (0, 2), Setting.P: (1, 3)}


@dataclass(frozen=True)
class GaussianTwoModeState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (4, 4):
            raise ValidationError(f"covariance must be 4x4, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("moments must be finite")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValidationError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def uncertainty_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``cov + i*Omega``; all >= 0 for a physical state."""
        return np.linalg.eigvalsh(self.cov + 1j * OMEGA)

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(self.uncertainty_eigenvalues()[0] >= -tol * max(1.0, np.max(np.abs(self.cov))))

    def check_physical(self) -> "GaussianTwoModeState":
        if not self.is_physical():
            raise NonPhysicalState(
                f"cov + i*Omega has eigenvalue {self.uncertainty_eigenvalues()[0]:.3g} < 0"
            )
        return self

    def mean_photon_number(self) -> float:
        """Total mean boson number, ``(tr cov - 4) / 4 + |mean|^2 / 4``."""
        return float((np.trace(self.cov) - 4.0) / 4.0 + self.mean @ self.mean / 4.0)

    def marginal(self, quad: Setting | str) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the (A, B) pair for one quadrature setting."""
        ia, ib = _QUAD_INDEX[Setting(quad)]
        idx = [ia, ib]
        return self.mean[idx].copy(), self.cov[np.ix_(idx, idx)].copy()

    def rotated_marginal(self, theta_a: float, theta_b: float) -> tuple[np.ndarray, np.ndarray]:
        """Moments of ``(cos t_a X_A + sin t_a P_A, cos t_b X_B + sin t_b P_B)``."""
        lin = np.array([
            [math.cos(theta_a), math.sin(theta_a), 0.0, 0.0],
            [0.0, 0.0, math.cos(theta_b), math.sin(theta_b)],
        ])
        return lin @ self.mean, lin @ self.cov @ lin.T

    def discretize(self, quad: Setting | str, policy: BinningPolicy | None = None) -> JointDistribution:
        mean, cov = self.marginal(quad)
        return JointDistribution.from_bivariate_normal(mean, cov, policy)


def vacuum() -> GaussianTwoModeState:
    return GaussianTwoModeState(np.zeros(4), np.eye(4))


def two_mode_squeezed(r: float) -> GaussianTwoModeState:
    if not math.isfinite(r):
        raise ValidationError("squeeze parameter must be finite")
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    cov = np.array([
        [c, 0, s, 0],
        [0, c, 0, -s],
        [s, 0, c, 0],
        [0, -s, 0, c],
    ], dtype=float)
    return GaussianTwoModeState(np.zeros(4), cov)


def apply_loss(
    s: GaussianTwoModeState, eta_a: float, eta_b: float, n_th: float = 0.0
) -> GaussianTwoModeState:
    """Independent beam-splitter loss on each mode, mixing in thermal noise of occupation ``n_th``."""
    for name, eta in (("eta_a", eta_a), ("eta_b", eta_b)):
        if not (0.0 <= eta <= 1.0):
            raise OutOfRangeTransmission(f"{name} must lie in [0, 1], got {eta!r}")
    if not (n_th >= 0 and math.isfinite(n_th)):
        raise OutOfRangeTransmission(f"n_th must be finite and >= 0, got {n_th!r}")
    scale = np.sqrt(np.array([eta_a, eta_a, eta_b, eta_b]))
    noise = (1.0 - np.array([eta_a, eta_a, eta_b, eta_b])) * (1.0 + 2.0 * n_th)
    cov = scale[:, None] * s.cov * scale[None, :] + np.diag(noise)
    return GaussianTwoModeState(scale * s.mean, cov)


def inference_variance_analytic(s: GaussianTwoModeState, quad: Setting | str) -> float:
    """Conditional variance of Bob's quadrature given Alice's (a Schur complement)."""
    _, cov = s.marginal(quad)
    if not cov[0, 0] > 0:
        raise SingularMarginal(f"Alice's {Setting(quad).value} marginal has zero variance")
    return float(max(cov[1, 1] - cov[0, 1] ** 2 / cov[0, 0], 0.0))


def epsilon_analytic(s: GaussianTwoModeState) -> float:
    return math.sqrt(inference_variance_analytic(s, Setting.X)) * math.sqrt(
        inference_variance_analytic(s, Setting.P)
    )


def duan_analytic(s: GaussianTwoModeState) -> float:
    """``(Var(X_A - X_B) + Var(P_A + P_B)) / 4``."""
    minus = np.array([1.0, 0.0, -1.0, 0.0])
    plus = np.array([0.0, 1.0, 0.0, 1.0])
    return float((minus @ s.cov @ minus + plus @ s.cov @ plus) / 4.0)


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def sample_normal(mean, cov, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws from N(mean, cov) via a Cholesky factor (eigen fallback if singular)."""
    mean = np.asarray(mean, dtype=float)
    factor = _sqrt_factor(np.asarray(cov, dtype=float))
    z = rng.standard_normal((n, mean.size))
    return mean + z @ factor.T


def sample(s: GaussianTwoModeState, n: int, seed: int = 0, stream: int = 0) -> np.ndarray:
    """``n`` i.i.d. quadrature vectors ``(X_A, P_A, X_B, P_B)``, shape ``(n, 4)``.

    Draws are keyed by ``(seed, stream)`` so parallel streams are reproducible.
    """
    if int(n) < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    s.check_physical()
    rng = np.random.default_rng([int(seed), int(stream)])
    return sample_normal(s.mean, s.cov, int(n), rng)
