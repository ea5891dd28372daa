"""Experiment configuration and the pipelines behind the CLI.

Every pipeline is a pure function of its config: all randomness flows from
``config.seed`` through labelled child seeds, so reruns are byte-identical.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import circuit as cir
from .coverage import FlagPlan, greedy_flag_placement
from .errors import GHZCSError, InvalidConfigError, ResourceLimitError
from .fidelity import (FidelityReport, RecoveryConfig, attach_ci, bootstrap_ci,
                       estimate_fidelity)
from .mitigate import ConfusionModel, rem_population, rem_samples
from .recover import (DEFAULT_ALPHA_RATIO, N_MAX_MARGIN, recover_coherence, sample_angles,
                      samples_from_rule)
from .rng import derive_seed
from .simulate import (MAX_TRAJECTORY_QUBITS, CountsTable, NoiseModel, ParitySample,
                       coherence_decay, emulate_fast_parity, emulate_population,
                       parity_expectation_from_counts, population_from_counts,
                       postselect_flags, run_statevector_trajectories,
                       trajectory_coherence)

BACKENDS = ("trajectory", "emulator")
MITIGATIONS = ("none", "rem", "dd")
QEM_CONFIGURATIONS = (("none",), ("rem",), ("dd",), ("rem", "dd"))
HYBRID_SWITCH_N = 10


@dataclass(frozen=True)
class ExperimentConfig:
    n: tuple[int, ...] = (10,)
    flags_k: tuple[int, ...] = (0,)
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: int = 1000
    m_samples: int | str = "5lnN"
    m_values: tuple[int, ...] = (4, 6, 8, 10, 12, 15, 20)
    trials: int = 1
    seed: int = 0
    backend: str = "emulator"
    mitigation: tuple[str, ...] = ("none",)
    confusion: dict | None = None
    alpha_ratio: float = DEFAULT_ALPHA_RATIO
    n_max_margin: int = N_MAX_MARGIN
    reference_trajectories: int = 100_000
    bootstrap: int = 0
    jobs: int = 1

    def __post_init__(self):
        n = (self.n,) if isinstance(self.n, int) else tuple(int(v) for v in self.n)
        flags = (self.flags_k,) if isinstance(self.flags_k, int) else tuple(self.flags_k)
        mitigation = ((self.mitigation,) if isinstance(self.mitigation, str)
                      else tuple(self.mitigation))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "flags_k", tuple(int(k) for k in flags))
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "mitigation", mitigation)
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseModel.from_dict(self.noise))
        self.validate()

    def validate(self):
        if not self.n or min(self.n) < 2:
            raise InvalidConfigError("GHZ sizes must be >= 2")
        if self.flags_k and min(self.flags_k) < 0:
            raise InvalidConfigError("flag counts must be non-negative")
        for name in ("shots", "trials", "jobs", "reference_trajectories"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be positive")
        if self.backend not in BACKENDS:
            raise InvalidConfigError(f"backend must be one of {BACKENDS}")
        unknown = set(self.mitigation) - set(MITIGATIONS)
        if unknown:
            raise InvalidConfigError(f"unknown mitigation {sorted(unknown)}")
        if self.bootstrap and self.bootstrap < 100:
            raise InvalidConfigError("bootstrap needs at least 100 resamples")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")
        if isinstance(self.m_samples, str):
            samples_from_rule(self.m_samples, 2)
        elif self.m_samples < 2:
            raise InvalidConfigError("m_samples must be >= 2")
        if self.backend == "trajectory":
            worst = max(self.n) + (max(self.flags_k) if self.flags_k else 0)
            if worst > MAX_TRAJECTORY_QUBITS:
                raise ResourceLimitError(
                    f"trajectory backend needs n + flags <= {MAX_TRAJECTORY_QUBITS}, got {worst}")
        elif any(k > 0 for k in self.flags_k):
            raise InvalidConfigError("the emulator does not model flag qubits; use trajectory")
        self.confusion_model()

    def confusion_model(self) -> ConfusionModel:
        if self.confusion is not None:
            return ConfusionModel.from_dict(self.confusion)
        return ConfusionModel.symmetric(self.noise.p_ro)

    def m_for(self, n: int) -> int:
        return samples_from_rule(self.m_samples, n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["noise"] = self.noise.to_dict()
        for key in ("n", "flags_k", "m_values", "mitigation"):
            out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfigError(f"unknown config fields {sorted(unknown)}")
        return cls(**data)


@dataclass
class RunOutput:
    """Raw (post-selected, unmitigated) data for one (n, k, dd) configuration."""

    n: int
    k: int
    plan: FlagPlan
    circuit: cir.Circuit
    samples: list[ParitySample]
    population_counts: CountsTable
    retained_fraction: float
    dd: bool = False


def prepared_circuit(n: int, k: int, dd: bool = False):
    base, tree = cir.build_ghz_tree(n)
    plan = greedy_flag_placement(tree, k)
    circuit = cir.attach_flag_checks(base, tree, plan.pairs)
    if dd:
        circuit = cir.insert_dd(circuit)
    return circuit, plan


def execute(config: ExperimentConfig, n: int, k: int = 0, dd: bool = False,
            trial: int = 0) -> RunOutput:
    """Sample M angles and run the parity circuits and the Z-basis circuit.

    Angles depend only on (seed, n, trial), so configurations that differ in
    k or DD are measured at the same angles.
    """
    circuit, plan = prepared_circuit(n, k, dd)
    m = config.m_for(n)
    phis = sample_angles(m, derive_seed(config.seed, "angles", n, trial))
    label = ("run", n, k, int(dd), trial)
    if config.backend == "emulator":
        counts = cir.count_gates(circuit)
        samples = emulate_fast_parity(n, counts, config.noise, phis, config.shots,
                                      derive_seed(config.seed, *label, "parity"))
        population = emulate_population(n, counts, config.noise, config.shots,
                                        derive_seed(config.seed, *label, "z"))
        return RunOutput(n, k, plan, circuit, samples, population, 1.0, dd)

    samples, kept, total = [], 0, 0
    for i, phi in enumerate(phis):
        raw = run_statevector_trajectories(cir.attach_parity_measurement(circuit, float(phi)),
                                           config.noise, config.shots,
                                           derive_seed(config.seed, *label, "parity", i))
        selected, _ = postselect_flags(raw)
        parity, shots = parity_expectation_from_counts(selected)
        samples.append(ParitySample(float(phi), parity, shots))
        kept += shots
        total += raw.shots
    raw = run_statevector_trajectories(cir.attach_z_measurement(circuit), config.noise,
                                       config.shots, derive_seed(config.seed, *label, "z"))
    population, _ = postselect_flags(raw)
    kept += population.shots
    total += raw.shots
    return RunOutput(n, k, plan, circuit, samples, population, kept / total, dd)


def analyze(config: ExperimentConfig, run: RunOutput, rem: bool = False,
            bootstrap_seed_keys=()) -> FidelityReport:
    """Population, coherence and fidelities, optionally readout-mitigated."""
    n_max = run.n + config.n_max_margin
    samples = run.samples
    raw_population = population_from_counts(run.population_counts)
    provenance = None
    confusion = None
    if rem:
        confusion = config.confusion_model()
        samples = rem_samples(samples, run.n, confusion)
        corrected = rem_population(run.population_counts, confusion)
        provenance = {"method": "rem", "confusion": confusion.to_dict(),
                      "population_raw": raw_population, "population_corrected": corrected,
                      "parities_raw": [s.parity for s in run.samples]}
        population = min(max(corrected, 0.0), 1.0)
    else:
        population = raw_population
    recovery = recover_coherence(samples, n_max, config.alpha_ratio)
    report = estimate_fidelity(population, recovery, run.retained_fraction)
    report.mitigation = provenance
    report.diagnostics.update({"n": run.n, "k": run.k, "dd": run.dd,
                               "coverage_ratio": run.plan.total_ratio,
                               "alpha_used": recovery.alpha_used,
                               "residual_norm": recovery.residual_norm,
                               "mean_parity": recovery.mean_parity})
    if config.bootstrap:
        rconf = RecoveryConfig(n_max, config.alpha_ratio, run.n, confusion)
        ci = bootstrap_ci(run.samples, run.population_counts, config.bootstrap,
                          derive_seed(config.seed, "bootstrap", *bootstrap_seed_keys), rconf)
        report = attach_ci(report, ci)
    return report


def _map(config: ExperimentConfig, fn, items):
    if config.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _failure(exc: GHZCSError) -> str:
    return f"error:{type(exc).__name__}"


# accuracy sweep ------------------------------------------------------------

ACCURACY_HEADER = ["n", "trial", "m", "n_rec", "c_est", "c_ref", "abs_error", "status"]


def reference_coherence(config: ExperimentConfig, n: int) -> float:
    """Trajectory coherence for n <= 10, emulator decay formula above."""
    circuit, _ = prepared_circuit(n, 0)
    if n <= HYBRID_SWITCH_N:
        value, _ = trajectory_coherence(circuit, config.noise, config.reference_trajectories,
                                        derive_seed(config.seed, "reference", n))
        return value
    return coherence_decay(cir.count_gates(circuit), config.noise)


def _accuracy_trial(args):
    config, n, trial, c_ref = args
    try:
        run = execute(config, n, 0, False, trial)
        rec = recover_coherence(run.samples, n + config.n_max_margin, config.alpha_ratio)
    except GHZCSError as exc:
        return {"n": n, "trial": trial, "m": config.m_for(n), "n_rec": -1, "c_est": math.nan,
                "c_ref": c_ref, "abs_error": math.nan, "status": _failure(exc)}
    return {"n": n, "trial": trial, "m": config.m_for(n), "n_rec": rec.n_rec,
            "c_est": rec.coherence, "c_ref": c_ref,
            "abs_error": abs(rec.coherence - c_ref), "status": "ok"}


def accuracy_sweep(config: ExperimentConfig) -> list[dict]:
    refs = {n: reference_coherence(config, n) for n in config.n}
    items = [(config, n, t, refs[n]) for n in config.n for t in range(config.trials)]
    return _map(config, _accuracy_trial, items)


def summarize(rows, key: str, value: str) -> list[dict]:
    """Median and 5th/95th percentiles of ``value`` grouped by ``key``."""
    out = []
    for group in sorted({r[key] for r in rows}, key=lambda g: (str(type(g)), g)):
        values = np.array([r[value] for r in rows
                           if r[key] == group and not math.isnan(r[value])])
        failures = sum(1 for r in rows if r[key] == group and r.get("status", "ok") != "ok")
        if values.size:
            p5, med, p95 = np.percentile(values, [5, 50, 95])
        else:
            p5 = med = p95 = math.nan
        out.append({key: group, "count": int(values.size), "failures": failures,
                    "median": float(med), "p5": float(p5), "p95": float(p95)})
    return out


# success sweep -------------------------------------------------------------

SUCCESS_HEADER = ["m", "trials", "successes", "success_rate"]


def _success_trial(args):
    config, n, m, trial, c_ref = args
    cfg = replace(config, m_samples=m)
    try:
        # distinct angle/shot streams per (M, trial)
        run = execute(cfg, n, 0, False, trial=m * 1_000_003 + trial)
        rec = recover_coherence(run.samples, n + config.n_max_margin, config.alpha_ratio)
    except GHZCSError as exc:
        return {"m": m, "trial": trial, "n_rec": -1, "success": False,
                "abs_error": math.nan, "status": _failure(exc)}
    return {"m": m, "trial": trial, "n_rec": rec.n_rec, "success": rec.n_rec == n,
            "abs_error": abs(rec.coherence - c_ref), "status": "ok"}


def success_sweep(config: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Frequency-identification rate P(n_rec = N) per sample count M.

    Returns (per-M rows, per-trial rows).
    """
    n = config.n[0]
    c_ref = coherence_decay(cir.count_gates(prepared_circuit(n, 0)[0]), config.noise)
    items = [(config, n, m, t, c_ref) for m in config.m_values for t in range(config.trials)]
    trials = _map(config, _success_trial, items)
    rows = []
    for m in config.m_values:
        hits = [r["success"] for r in trials if r["m"] == m]
        rows.append({"m": m, "trials": len(hits), "successes": int(sum(hits)),
                     "success_rate": sum(hits) / len(hits)})
    return rows, trials


# flag / QEM sweeps ---------------------------------------------------------

FLAG_HEADER = ["k", "trial", "mitigation", "coverage_ratio", "population", "coherence", "theta",
               "f_standard", "f_rotated", "retained_fraction", "n_rec", "gme_certified",
               "status"]


def _report_row(k, trial, label, coverage, report: FidelityReport | None, status="ok"):
    if report is None:
        nan = math.nan
        return {"k": k, "trial": trial, "mitigation": label, "coverage_ratio": coverage,
                "population": nan, "coherence": nan, "theta": nan, "f_standard": nan,
                "f_rotated": nan, "retained_fraction": nan, "n_rec": -1,
                "gme_certified": False, "status": status}
    return {"k": k, "trial": trial, "mitigation": label, "coverage_ratio": coverage,
            "population": report.population, "coherence": report.coherence,
            "theta": report.theta, "f_standard": report.f_standard,
            "f_rotated": report.f_rotated, "retained_fraction": report.retained_fraction,
            "n_rec": report.diagnostics["n_rec"], "gme_certified": report.gme_certified,
            "status": status}


def _flag_point(args):
    config, n, k, trial, configurations = args
    rows, reports = [], []
    runs = {}
    for methods in configurations:
        label = "+".join(methods)
        dd = "dd" in methods
        coverage = prepared_circuit(n, k)[1].total_ratio
        try:
            if dd not in runs:
                runs[dd] = execute(config, n, k, dd, trial)
            report = analyze(config, runs[dd], rem="rem" in methods,
                             bootstrap_seed_keys=(n, k, label, trial))
        except GHZCSError as exc:
            rows.append(_report_row(k, trial, label, coverage, None, _failure(exc)))
            reports.append(None)
            continue
        rows.append(_report_row(k, trial, label, coverage, report))
        reports.append(report)
    return rows, reports


def flag_sweep(config: ExperimentConfig, configurations=(("none",),)):
    """One row per (k, trial, mitigation configuration); also returns the reports."""
    n = config.n[0]
    items = [(config, n, k, t, configurations)
             for k in config.flags_k for t in range(config.trials)]
    rows, reports = [], []
    for r, rep in _map(config, _flag_point, items):
        rows += r
        reports += rep
    return rows, reports


def qem_sweep(config: ExperimentConfig):
    return flag_sweep(config, QEM_CONFIGURATIONS)


def mitigation_configurations(config: ExperimentConfig):
    """The single configuration requested by ``config.mitigation``."""
    methods = tuple(m for m in MITIGATIONS if m in config.mitigation and m != "none")
    return (methods or ("none",),)
