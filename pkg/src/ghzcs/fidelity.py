"""GHZ fidelity from population and coherence, with bootstrap intervals.

``f_rotated = (P + C) / 2`` is the overlap with the best phase-rotated GHZ
state; ``f_standard = (P + C cos(theta)) / 2`` is the overlap with the ideal
one.  Genuine multipartite entanglement is certified by ``f_rotated > 0.5``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import RecoveryDegeneracyError
from .mitigate import ConfusionModel, rem_population, rem_samples
from .recover import DEFAULT_ALPHA_RATIO, RecoveryResult, recover_coherence
from .rng import generator
from .simulate import CountsTable, ParitySample, population_from_counts

GME_THRESHOLD = 0.5
DEFAULT_RESAMPLES = 1000
QUANTITIES = ("population", "coherence", "theta", "f_standard", "f_rotated")


@dataclass
class FidelityReport:
    population: float
    coherence: float
    theta: float
    f_standard: float
    f_rotated: float
    gme_certified: bool
    retained_fraction: float | None = None
    ci: dict[str, list[float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    mitigation: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FidelityReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def certify_gme(report: FidelityReport) -> bool:
    return report.f_rotated > GME_THRESHOLD


def _fidelities(population: float, coherence: float, theta: float) -> tuple[float, float]:
    return (population + coherence * math.cos(theta)) / 2.0, (population + coherence) / 2.0


def estimate_fidelity(population: float, recovery: RecoveryResult,
                      retained_fraction: float | None = None) -> FidelityReport:
    if not 0.0 <= population <= 1.0:
        raise ValueError(f"population {population} outside [0, 1]")
    if recovery.coherence < 0:
        raise ValueError("coherence must be non-negative")
    f_std, f_rot = _fidelities(population, recovery.coherence, recovery.theta)
    warnings = []
    diagnostics = {"n_rec": recovery.n_rec, "m_samples": recovery.m_samples,
                   "coherence_raw": recovery.coherence,
                   "f_standard_raw": f_std, "f_rotated_raw": f_rot}
    if recovery.coherence > 1.0:
        warnings.append("coherence_above_one")
    clamped_std, clamped_rot = min(max(f_std, 0.0), 1.0), min(max(f_rot, 0.0), 1.0)
    if (clamped_std, clamped_rot) != (f_std, f_rot):
        warnings.append("fidelity_out_of_range")
    if recovery.low_signal:
        warnings.append("low_signal")
    report = FidelityReport(population, recovery.coherence, recovery.theta,
                            clamped_std, clamped_rot, False, retained_fraction,
                            warnings=warnings, diagnostics=diagnostics)
    report.gme_certified = certify_gme(report) and not recovery.low_signal
    return report


@dataclass(frozen=True)
class RecoveryConfig:
    """Everything needed to turn raw samples + counts into P, C and theta."""

    n_max: int
    alpha_ratio: float = DEFAULT_ALPHA_RATIO
    n_data: int | None = None
    confusion: ConfusionModel | None = None


def _point_estimates(samples, counts: CountsTable, config: RecoveryConfig):
    if config.confusion is not None:
        n = config.n_data or counts.n_bits
        samples = rem_samples(samples, n, config.confusion)
        population = min(max(rem_population(counts, config.confusion), 0.0), 1.0)
    else:
        population = population_from_counts(counts)
    recovery = recover_coherence(samples, config.n_max, config.alpha_ratio)
    f_std, f_rot = _fidelities(population, recovery.coherence, recovery.theta)
    return {"population": population, "coherence": recovery.coherence,
            "theta": recovery.theta, "f_standard": f_std, "f_rotated": f_rot}


def bootstrap_ci(samples, population_counts: CountsTable, resamples: int, seed: int,
                 config: RecoveryConfig, low: float = 5.0, high: float = 95.0) -> dict:
    """Percentile bootstrap over shots.

    Each resample redraws every angle's even-parity count from a binomial at
    the observed parity and the population counts from a multinomial at the
    observed frequencies, then reruns the full recovery.
    """
    if resamples < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    samples = list(samples)
    keys = sorted(population_counts.counts)
    freqs = np.array([population_counts.counts[k] for k in keys], dtype=float)
    total = int(freqs.sum())
    freqs /= total
    draws = {q: [] for q in QUANTITIES}
    failed = 0
    for r in range(resamples):
        rng = generator(seed, "bootstrap", r)
        resampled = []
        for s in samples:
            p_even = min(max((1.0 + s.parity) / 2.0, 0.0), 1.0)
            n_even = rng.binomial(s.shots, p_even)
            resampled.append(ParitySample(s.phi, (2.0 * n_even - s.shots) / s.shots, s.shots))
        counts = rng.multinomial(total, freqs)
        table = CountsTable(population_counts.n_bits,
                            {k: int(c) for k, c in zip(keys, counts) if c},
                            list(population_counts.data), [])
        try:
            values = _point_estimates(resampled, table, config)
        except RecoveryDegeneracyError:
            failed += 1
            continue
        for q in QUANTITIES:
            draws[q].append(values[q])
    if not draws["coherence"]:
        raise RecoveryDegeneracyError("every bootstrap resample was degenerate")
    out = {q: [float(np.percentile(v, low)), float(np.percentile(v, high))]
           for q, v in draws.items()}
    out["resamples"] = resamples
    out["failed_resamples"] = failed
    return out


def attach_ci(report: FidelityReport, ci: dict) -> FidelityReport:
    """Store intervals, widening each to include its point estimate.

    Bounds on population and fidelities are clamped to [0, 1] like the
    reported values; the coherence interval is left raw.
    """
    bounds = {}
    for q in QUANTITIES:
        lo, hi = ci[q]
        value = getattr(report, q)
        lo, hi = min(lo, value), max(hi, value)
        if q in ("population", "f_standard", "f_rotated"):
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        bounds[q] = [lo, hi]
    return replace(report, ci=bounds)
