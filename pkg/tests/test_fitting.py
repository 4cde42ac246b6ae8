import numpy as np
import pytest

from fsqsim.fitting import (
    DecayFit,
    FitError,
    fit_power_decay,
    fit_sinusoid_fixed_period,
)


def test_exact_decay_recovery():
    n = np.array([2, 6, 10, 14, 20, 26, 30])
    y = 0.95 * 0.99**n
    fit = fit_power_decay(n, y, sigma=np.full_like(y, 1e-4), offset=0.0)
    assert fit.amplitude == pytest.approx(0.95, abs=1e-9)
    assert fit.fidelity == pytest.approx(0.99, abs=1e-9)
    assert fit.converged


def test_decay_fit_needs_enough_lengths():
    with pytest.raises(FitError):
        fit_power_decay([3, 3, 3], [0.5, 0.5, 0.5], offset=0.0)


def test_shot_noise_recovery_study():
    # synthetic F = 0.9945, 1e4 shots per point: recovered within +-0.003
    rng = np.random.default_rng(17)
    n = np.arange(2, 31, 4)
    truth_a, truth_f = 0.97, 0.9945
    misses = 0
    for _ in range(20):
        p = truth_a * truth_f**n
        shots = 10_000
        y = rng.binomial(shots, p) / shots
        sigma = np.sqrt(np.maximum(y * (1 - y), 1e-9) / shots)
        fit = fit_power_decay(n, y, sigma, offset=0.0)
        if abs(fit.fidelity - truth_f) > 0.003:
            misses += 1
    assert misses == 0


def test_estimator_unbiased_over_regenerations():
    rng = np.random.default_rng(5)
    n = np.arange(2, 31, 4)
    truth_f, truth_a = 0.985, 0.96
    sigma = 0.004
    fits = []
    for _ in range(100):
        y = truth_a * truth_f**n + rng.normal(0, sigma, len(n))
        fit = fit_power_decay(n, y, np.full(len(n), sigma), offset=0.0)
        fits.append((fit.fidelity, fit.fidelity_err))
    mean_f = np.mean([f for f, _ in fits])
    typical_err = np.mean([e for _, e in fits])
    assert abs(mean_f - truth_f) < typical_err / 10 * 1.5


def test_decay_fit_validation():
    with pytest.raises(ValueError):
        DecayFit(amplitude=1.0, fidelity=1.2, covariance=np.eye(2),
                 residual_norm=0.0)


def test_sinusoid_fit_exact():
    ph = np.linspace(0, 2 * np.pi, 21)
    vals = 0.45 * np.cos(2 * ph + 0.3) + 0.5
    c, delta, off, cerr = fit_sinusoid_fixed_period(ph, vals, period=np.pi)
    assert c == pytest.approx(0.45, abs=1e-12)
    assert delta == pytest.approx(0.3, abs=1e-12)
    assert off == pytest.approx(0.5, abs=1e-12)
