"""Single-tone recovery of the parity oscillation from random-angle samples.

Model: ``y(phi) = a cos(N phi) - b sin(N phi) = C cos(N phi + theta)``.
Recovery runs Lasso over candidate frequencies 1..n_max to find N, then an
unregularized two-column least-squares fit on that frequency to undo the
L1 shrinkage. :func:`fourier_grid_estimate` is the dense-grid baseline.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidConfigError, RecoveryDegeneracyError
from .rng import generator
from .simulate import ParitySample

DEFAULT_ALPHA_RATIO = 0.1
N_MAX_MARGIN = 8
LOW_SIGNAL = 1e-12
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class MeasurementMatrix:
    n_max: int
    phis: np.ndarray
    entries: np.ndarray


@dataclass(frozen=True)
class CoefficientVector:
    a: np.ndarray
    b: np.ndarray
    converged: bool = True
    sweeps: int = 0

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.a, self.b)


@dataclass(frozen=True)
class RecoveryResult:
    n_rec: int
    a: float
    b: float
    coherence: float
    theta: float
    alpha_used: float
    m_samples: int
    residual_norm: float
    low_signal: bool = False
    converged: bool = True
    mean_parity: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RecoveryResult":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def default_n_max(n: int) -> int:
    return n + N_MAX_MARGIN


def sample_angles(m: int, seed: int) -> np.ndarray:
    """``m`` distinct i.i.d. uniform angles in [0, 2 pi)."""
    if m < 2:
        raise InvalidConfigError("need at least two angles")
    rng = generator(seed, "angles")
    phis: list[float] = []
    while len(phis) < m:
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        if all(abs(phi - other) > 1e-12 for other in phis):
            phis.append(phi)
    return np.array(phis)


def samples_from_rule(rule, n: int) -> int:
    """Resolve an M rule: an explicit count or ``"5lnN"``."""
    if isinstance(rule, str):
        if rule.replace(" ", "").lower() != "5lnn":
            raise InvalidConfigError(f"unknown sample-count rule {rule!r}")
        return max(2, math.ceil(5.0 * math.log(n)))
    if int(rule) < 2:
        raise InvalidConfigError("m_samples must be >= 2")
    return int(rule)


def build_measurement_matrix(phis, n_max: int) -> MeasurementMatrix:
    """Rows ``[cos(k phi) for k=1..n_max | -sin(k phi) for k=1..n_max]``."""
    phis = np.asarray(phis, dtype=float)
    if phis.size == 0:
        raise ValueError("no sampling angles")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    arg = np.outer(phis, np.arange(1, n_max + 1))
    return MeasurementMatrix(n_max, phis, np.hstack([np.cos(arg), -np.sin(arg)]))


def alpha_max(matrix: MeasurementMatrix, y) -> float:
    """Smallest penalty for which the Lasso solution is exactly zero."""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(matrix.entries.T @ y)) / len(y))


def lasso_objective(matrix: MeasurementMatrix, y, x, alpha: float) -> float:
    r = np.asarray(y) - matrix.entries @ x
    return float(r @ r / (2 * len(r)) + alpha * np.abs(x).sum())


def lasso_fit(matrix: MeasurementMatrix, y, alpha: float, tol: float = 1e-8,
              max_sweeps: int = 10_000) -> CoefficientVector:
    """Minimize ``(1/2M) ||y - A x||^2 + alpha ||x||_1`` by cyclic coordinate descent.

    Sweeps alternate between the full coordinate set and the current active
    set (glmnet-style); the result is accepted only after a full sweep whose
    largest update is below ``tol``.
    """
    A = matrix.entries
    y = np.asarray(y, dtype=float)
    m, p = A.shape
    if len(y) != m:
        raise ValueError(f"{len(y)} samples for a {m}-row matrix")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    gram = A.T @ A
    corr = A.T @ y
    col_sq = np.diag(gram).copy()
    threshold = m * alpha
    x = np.zeros(p)
    grad = corr.copy()  # A^T (y - A x)
    sweeps = 0
    converged = False
    full = True
    while sweeps < max_sweeps:
        coords = range(p) if full else np.flatnonzero(x).tolist()
        max_step = 0.0
        for j in coords:
            if col_sq[j] == 0.0:
                continue
            rho = grad[j] + col_sq[j] * x[j]
            new = math.copysign(max(abs(rho) - threshold, 0.0), rho) / col_sq[j]
            step = new - x[j]
            if step != 0.0:
                grad -= gram[:, j] * step
                x[j] = new
                max_step = max(max_step, abs(step))
        sweeps += 1
        if max_step < tol:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    n = matrix.n_max
    return CoefficientVector(x[:n].copy(), x[n:].copy(), converged, sweeps)


def detect_support(coeffs: CoefficientVector) -> tuple[int, bool]:
    """Frequency with the largest coefficient magnitude, and a low-signal flag.

    Ties resolve to the smallest frequency; an all-zero vector yields (1, True).
    """
    mags = coeffs.magnitude
    if mags.size == 0:
        raise ValueError("empty coefficient vector")
    k = int(np.argmax(mags))
    if mags[k] < LOW_SIGNAL:
        return 1, True
    return k + 1, False


def ols_refine(phis, y, n_rec: int) -> tuple[float, float, float]:
    """Least squares for (a, b) on columns cos(n phi), -sin(n phi); returns (a, b, residual)."""
    phis = np.asarray(phis, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(phis) < 2:
        raise RecoveryDegeneracyError("need at least two samples for the refinement fit")
    cols = np.column_stack([np.cos(n_rec * phis), -np.sin(n_rec * phis)])
    normal = cols.T @ cols
    if np.linalg.cond(normal) > MAX_CONDITION:
        raise RecoveryDegeneracyError(
            f"sampling angles cannot separate the quadratures at frequency {n_rec}")
    a, b = np.linalg.solve(normal, cols.T @ y)
    residual = float(np.linalg.norm(y - cols @ np.array([a, b])))
    return float(a), float(b), residual


def wrap_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def recover_coherence(samples, n_max: int, alpha_ratio: float = DEFAULT_ALPHA_RATIO,
                      phis=None) -> RecoveryResult:
    """Lasso support detection followed by OLS refinement on the detected frequency."""
    samples = list(samples)
    if phis is not None and not np.allclose(phis, [s.phi for s in samples], rtol=0, atol=0):
        raise ValueError("angles are not aligned with the samples")
    phis = np.array([s.phi for s in samples])
    y = np.array([s.parity for s in samples])
    matrix = build_measurement_matrix(phis, n_max)
    alpha = alpha_ratio * alpha_max(matrix, y)
    coeffs = lasso_fit(matrix, y, alpha)
    n_rec, low = detect_support(coeffs)
    a, b, residual = ols_refine(phis, y, n_rec)
    return RecoveryResult(
        n_rec=n_rec, a=a, b=b, coherence=math.hypot(a, b), theta=wrap_angle(math.atan2(b, a)),
        alpha_used=alpha, m_samples=len(y), residual_norm=residual, low_signal=low,
        converged=coeffs.converged, mean_parity=float(y.mean()))


def fourier_grid(n: int) -> np.ndarray:
    """The 2(n+1) equally spaced angles j pi / (n+1)."""
    return np.arange(2 * (n + 1)) * math.pi / (n + 1)


def fourier_grid_estimate(grid_parities, n: int) -> tuple[float, float]:
    """Coherence ``|I_n| + |I_-n|`` and phase ``-arg(I_n)`` from a full grid."""
    values = np.asarray(grid_parities, dtype=float)
    if values.shape != (2 * (n + 1),):
        raise ValueError(f"expected {2 * (n + 1)} grid values, got {values.shape}")
    phis = fourier_grid(n)
    i_pos = np.mean(np.exp(1j * n * phis) * values)
    i_neg = np.mean(np.exp(-1j * n * phis) * values)
    coherence = abs(i_pos) + abs(i_neg)
    theta = wrap_angle(-math.atan2(i_pos.imag, i_pos.real)) if coherence > 0 else 0.0
    return float(coherence), theta
