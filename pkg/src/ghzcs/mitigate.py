"""Readout error mitigation under a tensored single-qubit confusion model.

Only two quantities feed the fidelity: the GHZ population and parity
expectations. Both are computed without materializing the 2**n inverse:
the population needs just the all-zeros and all-ones rows of the
tensored inverse, and a product of +-1 observables under independent
symmetric flips is simply scaled by ``(1 - 2p)**n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AmplificationError, InvalidConfigError
from .simulate import CountsTable, ParitySample

MIN_PARITY_SCALE = 1e-6


@dataclass(frozen=True)
class ConfusionModel:
    """Per-qubit flip probabilities: p01 = P(read 1 | 0), p10 = P(read 0 | 1)."""

    p01: np.ndarray
    p10: np.ndarray

    def __post_init__(self):
        p01 = np.atleast_1d(np.asarray(self.p01, dtype=float))
        p10 = np.atleast_1d(np.asarray(self.p10, dtype=float))
        if p01.shape != p10.shape:
            raise InvalidConfigError("p01 and p10 must have the same length")
        if np.any(p01 < 0) or np.any(p10 < 0) or np.any(p01 >= 0.5) or np.any(p10 >= 0.5):
            raise InvalidConfigError("confusion probabilities must lie in [0, 0.5)")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @classmethod
    def symmetric(cls, p_ro: float) -> "ConfusionModel":
        return cls(p_ro, p_ro)

    @classmethod
    def from_dict(cls, data: dict) -> "ConfusionModel":
        if "p01" not in data or "p10" not in data:
            raise InvalidConfigError("mitigation config needs 'p01' and 'p10'")
        return cls(data["p01"], data["p10"])

    def to_dict(self) -> dict:
        def scalar(v):
            return float(v[0]) if v.size == 1 else v.tolist()
        return {"p01": scalar(self.p01), "p10": scalar(self.p10)}

    def per_qubit(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.p01.size == 1:
            return np.full(n, self.p01[0]), np.full(n, self.p10[0])
        if self.p01.size != n:
            raise InvalidConfigError(f"confusion model has {self.p01.size} qubits, data has {n}")
        return self.p01, self.p10

    def inverses(self, n: int) -> np.ndarray:
        """Stack of 2x2 inverse confusion matrices, shape (n, 2, 2), indexed [true, read]."""
        p01, p10 = self.per_qubit(n)
        out = np.empty((n, 2, 2))
        for q in range(n):
            # columns: true state, rows: read-out value
            confusion = np.array([[1 - p01[q], p10[q]], [p01[q], 1 - p10[q]]])
            out[q] = np.linalg.inv(confusion)
        return out

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.p01, self.p10, rtol=0, atol=0) and np.ptp(self.p01) == 0)


def rem_distribution_rows(counts: CountsTable, model: ConfusionModel) -> tuple[float, float]:
    """Mitigated probabilities of the all-zeros and all-ones outcomes."""
    n = counts.n_bits
    inv = model.inverses(n)
    total = counts.shots
    if total == 0:
        raise ValueError("empty counts")
    q = np.arange(n)
    zeros = ones = 0.0
    for key in sorted(counts.counts):
        bits = np.frombuffer(key.encode(), dtype=np.uint8) - ord("0")
        weight = counts.counts[key] / total
        zeros += weight * float(np.prod(inv[q, 0, bits]))
        ones += weight * float(np.prod(inv[q, 1, bits]))
    return zeros, ones


def rem_population(counts: CountsTable, model: ConfusionModel) -> float:
    """Readout-corrected GHZ population (may leave [0, 1] under shot noise)."""
    if counts.flags:
        raise ValueError("post-select flags before mitigation")
    zeros, ones = rem_distribution_rows(counts, model)
    return zeros + ones


def parity_scale(n: int, p: float) -> float:
    return (1.0 - 2.0 * p) ** n


def rem_parity(parity_raw: float, n: int, model: ConfusionModel) -> float:
    """Undo symmetric readout flips on an n-qubit parity expectation."""
    if not model.is_symmetric:
        raise InvalidConfigError("parity correction needs a symmetric, uniform confusion model")
    scale = parity_scale(n, float(model.p01[0]))
    if scale < MIN_PARITY_SCALE:
        raise AmplificationError(f"readout scaling (1-2p)^n = {scale:.3g} is too small to invert")
    return parity_raw / scale


def rem_samples(samples, n: int, model: ConfusionModel) -> list[ParitySample]:
    """Corrected copies of parity samples, clamped to [-1, 1]."""
    out = []
    for s in samples:
        value = rem_parity(s.parity, n, model)
        out.append(ParitySample(s.phi, float(np.clip(value, -1.0, 1.0)), s.shots))
    return out
