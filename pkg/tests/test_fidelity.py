import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghzcs.circuit import GateCounts
from ghzcs.fidelity import (FidelityReport, RecoveryConfig, attach_ci, bootstrap_ci, certify_gme,
                            estimate_fidelity)
from ghzcs.recover import RecoveryResult, recover_coherence, sample_angles
from ghzcs.simulate import NoiseModel, emulate_fast_parity, emulate_population


def recovery(c, theta, low=False):
    return RecoveryResult(n_rec=5, a=c * math.cos(theta), b=c * math.sin(theta), coherence=c,
                          theta=theta, alpha_used=0.0, m_samples=15, residual_norm=0.0,
                          low_signal=low, converged=True, mean_parity=0.0)


@pytest.mark.parametrize("p, c, theta, f_std, f_rot", [
    (1.0, 1.0, 0.0, 1.0, 1.0),
    (0.9, 0.8, 0.0, 0.85, 0.85),
    (0.9, 0.8, math.pi, 0.05, 0.85),
])
def test_examples(p, c, theta, f_std, f_rot):
    r = estimate_fidelity(p, recovery(c, theta))
    assert r.f_standard == pytest.approx(f_std, abs=1e-12)
    assert r.f_rotated == pytest.approx(f_rot, abs=1e-12)


def test_gme_threshold():
    assert certify_gme(estimate_fidelity(0.6, recovery(0.41, 0.0)))
    assert not certify_gme(estimate_fidelity(0.6, recovery(0.4, 0.0)))
    assert not estimate_fidelity(0.9, recovery(0.9, 0.0, low=True)).gme_certified


def test_clamping_and_warnings():
    r = estimate_fidelity(1.0, recovery(1.2, 0.0))
    assert r.f_rotated == 1.0
    assert r.diagnostics["f_rotated_raw"] == pytest.approx(1.1)
    assert {"coherence_above_one", "fidelity_out_of_range"} <= set(r.warnings)
    assert FidelityReport.from_dict(r.to_dict()) == r


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        estimate_fidelity(1.2, recovery(0.5, 0.0))


@given(p=st.floats(0, 1), c=st.floats(0, 1), theta=st.floats(-math.pi, math.pi))
@settings(max_examples=200, deadline=None)
def test_fidelity_invariants(p, c, theta):
    r = estimate_fidelity(p, recovery(c, theta))
    assert r.f_rotated == pytest.approx((p + c) / 2, abs=1e-15)
    raw = (p + c * math.cos(theta)) / 2
    assert r.diagnostics["f_standard_raw"] == pytest.approx(raw, abs=1e-15)
    assert r.f_standard == pytest.approx(min(max(raw, 0.0), 1.0), abs=1e-15)
    assert r.f_standard <= r.f_rotated
    same_gme = estimate_fidelity(p, recovery(c, 0.0)).gme_certified
    assert r.gme_certified == same_gme == (r.f_rotated > 0.5)


@given(p=st.floats(0, 0.9), c=st.floats(0, 0.9), d=st.floats(1e-3, 0.1))
@settings(max_examples=100, deadline=None)
def test_rotated_fidelity_strictly_increasing(p, c, d):
    base = estimate_fidelity(p, recovery(c, 0.3)).f_rotated
    assert estimate_fidelity(p + d, recovery(c, 0.3)).f_rotated > base
    assert estimate_fidelity(p, recovery(c + d, 0.3)).f_rotated > base


def _emulated(n=12, theta=0.4, seed=0):
    noise = NoiseModel(p_2q=0.01, phase_offset=theta)
    counts = GateCounts(1, n - 1)
    samples = emulate_fast_parity(n, counts, noise, sample_angles(15, seed), 1000, seed)
    population = emulate_population(n, counts, noise, 1000, seed + 1)
    return samples, population


def test_bootstrap_contains_point_and_is_deterministic():
    samples, population = _emulated()
    config = RecoveryConfig(n_max=20)
    ci = bootstrap_ci(samples, population, 200, 7, config)
    assert ci == bootstrap_ci(samples, population, 200, 7, config)
    assert ci["resamples"] == 200 and ci["failed_resamples"] == 0
    rec = recover_coherence(samples, 20)
    report = attach_ci(estimate_fidelity(population.counts.get("0" * 12, 0) / 1000
                                         + population.counts.get("1" * 12, 0) / 1000, rec), ci)
    for q, (lo, hi) in report.ci.items():
        assert lo <= getattr(report, q) <= hi
    assert 0 <= report.ci["f_rotated"][0] and report.ci["f_rotated"][1] <= 1
    with pytest.raises(ValueError):
        bootstrap_ci(samples, population, 50, 7, config)


def test_phase_offset_separates_fidelities():
    samples, population = _emulated(theta=1.0)
    rec = recover_coherence(samples, 20)
    report = estimate_fidelity(0.9, rec)
    assert report.f_standard < report.f_rotated
    assert abs(abs(rec.theta) - 1.0) < 0.2
    assert np.isfinite(report.f_standard)
