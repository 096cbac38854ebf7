"""Two-mode Fock-space engine for boson-number certification.

The Duan parameter ``D = (Var(X_A - X_B) + Var(P_A + P_B)) / 4`` bounds the
boson content of any pure entangled component of a state:

* by mean number, through ``dl_bound(nbar) = 1 + nbar - sqrt(nbar**2 + 2*nbar)``,
  which the two-mode squeezed state saturates;
* by support, through ``D_n0``: the minimum of D over states spanned by
  ``|i, j>`` with ``i + j <= n0``. Observing ``D < D_n0`` needs components
  with more than ``n0`` bosons.

Amplitude tables are indexed ``amps[i, j]`` for ``|i>_a |j>_b``.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (
    CutoffTooSmall,
    DOutOfRange,
    SupportExceedsCutoff,
    TruncationUnsafe,
    ValidationError,
)

NORMALIZATION_TOL = 1e-12
TRUNCATION_WARN = 1e-8
TWO_WAY_STEERING_D = 0.5
DEFAULT_TABLE = "dn0_table.csv"


def single_mode_annihilation(cutoff: int) -> np.ndarray:
    """``a`` on ``span{|0>, ..., |cutoff>}`` with ``<n-1|a|n> = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def annihilation_matrices(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """``(a, b)`` on the ``(cutoff+1)**2``-dim product basis, index ``i*(cutoff+1) + j``."""
    if int(cutoff) < 1:
        raise ValidationError(f"cutoff must be >= 1, got {cutoff!r}")
    a1 = single_mode_annihilation(int(cutoff))
    eye = np.eye(int(cutoff) + 1)
    return np.kron(a1, eye), np.kron(eye, a1)


def quadratures(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``X = a + a^dag``, ``P = -i(a - a^dag)``."""
    ad = a.conj().T
    return a + ad, -1j * (a - ad)


def epr_operators(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """``(X_A - X_B, P_A + P_B)`` as dense matrices."""
    a, b = annihilation_matrices(cutoff)
    xa, pa = quadratures(a)
    xb, pb = quadratures(b)
    return xa - xb, pa + pb


@dataclass(frozen=True)
class FockVector:
    cutoff: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        n = int(self.cutoff)
        if n < 1:
            raise ValidationError("cutoff must be >= 1")
        if amps.shape != (n + 1, n + 1):
            raise ValidationError(f"amps must have shape {(n + 1, n + 1)}, got {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"state norm is {norm!r}, not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "cutoff", n)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_unnormalized(cls, amps) -> "FockVector":
        amps = np.asarray(amps, dtype=complex)
        return cls(amps.shape[0] - 1, amps / np.linalg.norm(amps))

    @classmethod
    def basis(cls, i: int, j: int, cutoff: int | None = None) -> "FockVector":
        cutoff = max(i, j) + 1 if cutoff is None else cutoff
        amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        amps[i, j] = 1.0
        return cls(cutoff, amps)

    @property
    def vector(self) -> np.ndarray:
        return self.amps.ravel()

    def mean_number(self) -> float:
        n = np.arange(self.cutoff + 1)
        return float(np.sum((n[:, None] + n[None, :]) * np.abs(self.amps) ** 2))

    def top_level_weight(self) -> float:
        """Weight on either mode's highest retained level."""
        p = np.abs(self.amps) ** 2
        return float(p[-1, :].sum() + p[:-1, -1].sum())


def _lower_a(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    out = np.zeros_like(c)
    out[:-1] = np.sqrt(np.arange(1, n))[:, None] * c[1:]
    return out


def _raise_a(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    out = np.zeros_like(c)
    out[1:] = np.sqrt(np.arange(1, n))[:, None] * c[:-1]
    return out


def _epr_apply(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``X_A - X_B`` and ``P_A + P_B`` to a padded amplitude table."""
    a, ad = _lower_a(c), _raise_a(c)
    b, bd = _lower_a(c.T).T, _raise_a(c.T).T
    u = a + ad - b - bd
    v = -1j * (a - ad + b - bd)
    return u, v


def duan_fock(psi: FockVector) -> float:
    """Duan parameter of a pure state.

    The state is padded by one level before the ladder operators act, so
    second moments are exact for whatever amplitudes are given.
    """
    if psi.top_level_weight() > TRUNCATION_WARN:
        warnings.warn(
            f"weight {psi.top_level_weight():.2e} on the top retained level; "
            "the state itself may be truncated",
            TruncationUnsafe,
            stacklevel=2,
        )
    c = np.zeros((psi.cutoff + 2, psi.cutoff + 2), dtype=complex)
    c[:-1, :-1] = psi.amps
    u, v = _epr_apply(c)
    total = 0.0
    for o in (u, v):
        first = float(np.vdot(c, o).real)
        second = float(np.vdot(o, o).real)
        total += second - first**2
    return total / 4.0


def tmss_fock(r: float, cutoff: int) -> FockVector:
    """Two-mode squeezed vacuum, amplitudes proportional to ``tanh(r)**n`` on ``|n, n>``."""
    x = math.tanh(r)
    if x ** (2 * (cutoff + 1)) >= 1e-10:
        raise CutoffTooSmall(
            f"tail weight tanh(r)^(2(N+1)) = {x ** (2 * (cutoff + 1)):.2e} at cutoff {cutoff}"
        )
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amps[np.diag_indices(cutoff + 1)] = x ** np.arange(cutoff + 1)
    return FockVector.from_unnormalized(amps)


def dl_bound(nbar: float) -> float:
    """Smallest D reachable by a pure state of mean boson number ``nbar``."""
    if nbar < 0:
        raise ValidationError(f"nbar must be >= 0, got {nbar!r}")
    # 1 + n - sqrt(n^2 + 2n), rationalized
    return 1.0 / (1.0 + nbar + math.sqrt(nbar * nbar + 2.0 * nbar))


def nbar_lower_bound(D: float) -> float:
    """Inverse of :func:`dl_bound`: ``(1 - D)**2 / (2 D)``."""
    if not (0.0 < D <= 1.0):
        raise DOutOfRange(f"D must lie in (0, 1], got {D!r}")
    return (1.0 - D) ** 2 / (2.0 * D)


def duan_spin(var_z: float, var_y: float, jx_a: float, jx_b: float) -> float:
    """Spin form of D: ``(Var(J_A^Z + J_B^Z) + Var(J_A^Y + J_B^Y)) / (|<J_A^X>| + |<J_B^X>|)``.

    Both numerator terms are variances. The caller picks the signs of the
    combined spins to match the correlations of the state.
    """
    denom = abs(jx_a) + abs(jx_b)
    if not denom > 0:
        raise ValidationError("spin normalization must be positive")
    return (var_z + var_y) / denom


class SupportConvention(str, enum.Enum):
    INCLUSIVE = "inclusive"  # i + j <= n0
    EXCLUSIVE = "exclusive"  # i + j < n0


def support_indices(n0: int, cutoff: int, convention: str = "inclusive") -> list[tuple[int, int]]:
    limit = n0 if SupportConvention(convention) is SupportConvention.INCLUSIVE else n0 - 1
    return [(i, j) for i in range(cutoff + 1) for j in range(cutoff + 1) if i + j <= limit]


def _restricted_moments(n0: int, convention: str):
    """First and second moments of the EPR operators projected onto the support."""
    limit = n0 if SupportConvention(convention) is SupportConvention.INCLUSIVE else n0 - 1
    if limit < 0:
        raise ValidationError(f"support for n0={n0} ({convention}) is empty")
    # one spare level keeps the projected squares exact
    n = max(limit, 1) + 1
    u, v = epr_operators(n)
    idx = [i * (n + 1) + j for i, j in support_indices(n0, n, convention)]
    sub = np.ix_(idx, idx)
    return u[sub], (u @ u)[sub], v[sub], (v @ v)[sub]


def _line_minimize(g, center: float, half_width: float, tol: float) -> tuple[float, float]:
    grid = center + np.linspace(-half_width, half_width, 41)
    vals = [g(t) for t in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    if res.fun <= vals[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(vals[k])


def min_duan_over_support(
    n0: int, cutoff: int | None = None, convention: str = "inclusive", tol: float = 1e-9
) -> float:
    """Minimum D over normalized states supported on ``i + j <= n0`` (or ``< n0``).

    For fixed shifts ``(alpha, beta)`` the smallest eigenvalue of the projected
    ``((U - alpha)**2 + (V - beta)**2) / 4`` minimizes the shifted second
    moment; minimizing over the shifts as well turns second moments into
    variances. The shifts are found by coordinate descent from the origin.
    """
    n0 = int(n0)
    if n0 < 0:
        raise ValidationError(f"n0 must be >= 0, got {n0!r}")
    if cutoff is not None and int(cutoff) < n0:
        raise SupportExceedsCutoff(f"support up to {n0} bosons needs cutoff >= {n0}, got {cutoff}")
    u1, u2, v1, v2 = _restricted_moments(n0, convention)
    eye = np.eye(u1.shape[0])

    def objective(alpha, beta):
        m = (u2 - 2 * alpha * u1 + alpha**2 * eye + v2 - 2 * beta * v1 + beta**2 * eye) / 4.0
        return float(np.linalg.eigvalsh(m)[0])

    alpha = beta = 0.0
    best = objective(alpha, beta)
    # |<U>| <= sqrt(<U^2>) <= 2 sqrt(2 (n0 + 1))
    width = 2.0 * math.sqrt(2.0 * (n0 + 1)) + 1.0
    for _ in range(100):
        alpha, _ = _line_minimize(lambda t: objective(t, beta), alpha, width, tol * 1e-2)
        beta, value = _line_minimize(lambda t: objective(alpha, t), beta, width, tol * 1e-2)
        improved = best - value
        best = min(best, value)
        if improved < tol:
            break
    return best


@dataclass(frozen=True)
class DN0Entry:
    n0: int
    d_value: float
    convention: str
    cutoff: int


def duan_table(
    n0_values: Iterable[int], cutoff: int | None = None, convention: str = "inclusive"
) -> list[DN0Entry]:
    rows = []
    for n0 in n0_values:
        used = cutoff if cutoff is not None else n0 + 1
        value = min_duan_over_support(n0, used, convention)
        rows.append(DN0Entry(int(n0), value, SupportConvention(convention).value, int(used)))
    return rows


def write_table_csv(rows: Sequence[DN0Entry], path) -> None:
    """Write the table to a path or an open text stream."""
    if hasattr(path, "write"):
        _write_table(rows, path)
        return
    with open(path, "w", newline="") as fh:
        _write_table(rows, fh)


def _write_table(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n0", "d_value", "convention", "cutoff"])
    for row in rows:
        w.writerow([row.n0, repr(row.d_value), row.convention, row.cutoff])


def read_table_csv(path) -> list[DN0Entry]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"n0", "d_value", "convention", "cutoff"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"D_n0 table is missing columns {sorted(missing)}")
        return [DN0Entry(int(r["n0"]), float(r["d_value"]), r["convention"], int(r["cutoff"]))
                for r in reader]


def default_table_path() -> Path:
    return Path(str(resources.files("mesoepr") / "data" / DEFAULT_TABLE))


def load_default_table() -> list[DN0Entry]:
    return read_table_csv(default_table_path())


class Classification(str, enum.Enum):
    NO_CERTIFICATE = "no_certificate"
    ENTANGLED = "entangled"
    TWO_WAY_STEERABLE = "two_way_steerable"


@dataclass(frozen=True)
class CertificationResult:
    d_value: float
    nbar_min: float
    n0_min: int
    classification: Classification

    @property
    def entangled(self) -> bool:
        return self.classification is not Classification.NO_CERTIFICATE

    def to_dict(self) -> dict:
        return {
            "d_value": self.d_value,
            "nbar_min": self.nbar_min,
            "n0_min": self.n0_min,
            "classification": self.classification.value,
        }


def certify(D: float, table: Sequence[DN0Entry] | None = None) -> CertificationResult:
    """Lower bounds on the boson content implied by a measured D.

    ``n0_min`` is the largest tabulated ``n0`` with ``D < D_n0`` (0 if none).
    ``D > 1`` is accepted and certifies nothing.
    """
    if not (D > 0 and math.isfinite(D)):
        raise DOutOfRange(f"D must be positive and finite, got {D!r}")
    table = load_default_table() if table is None else table
    if D >= 1.0:
        return CertificationResult(float(D), 0.0, 0, Classification.NO_CERTIFICATE)
    n0_min = max((row.n0 for row in table if D < row.d_value), default=0)
    kind = Classification.TWO_WAY_STEERABLE if D < TWO_WAY_STEERING_D else Classification.ENTANGLED
    return CertificationResult(float(D), nbar_lower_bound(D), int(n0_min), kind)


class DuanCertifier(BaseEstimator):
    """Tabulate ``D_n0`` on ``fit`` and map measured D values to certificates.

    Parameters
    ----------
    n0_max : int
        Largest support size tabulated.
    convention : {"inclusive", "exclusive"}
    cutoff : int or None
        Per-mode cutoff recorded with the table; ``None`` uses ``n0 + 1``.
    """

    def __init__(self, n0_max=14, convention="inclusive", cutoff=None):
        self.n0_max = n0_max
        self.convention = convention
        self.cutoff = cutoff

    def fit(self, X=None, y=None):
        self.table_ = duan_table(range(1, self.n0_max + 1), self.cutoff, self.convention)
        return self

    def predict(self, D):
        """``n0_min`` for each measured D."""
        check_is_fitted(self, "table_")
        return np.array([certify(float(d), self.table_).n0_min for d in np.atleast_1d(D)])

    def certify(self, D: float) -> CertificationResult:
        check_is_fitted(self, "table_")
        return certify(D, self.table_)
