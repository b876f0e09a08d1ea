import numpy as np
import pytest

from plcmimic.errors import DegenerateDensity
from plcmimic.sampling import (
    SamplerConfig,
    adjusted_cdf,
    adjusted_density,
    ks_distance,
    weighted_x_samples,
)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def cauchy(x):
    return 1.0 / (np.pi * (1.0 + x * x))


class TestConfigValidation:
    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            SamplerConfig(10, 1.0, -1.0)

    def test_rejects_bad_mix(self):
        with pytest.raises(ValueError):
            SamplerConfig(10, 0.0, 1.0, mix_ratio=1.5)

    def test_rejects_bad_power(self):
        with pytest.raises(ValueError):
            SamplerConfig(10, 0.0, 1.0, power=0.0)


def test_density_integrates_to_one():
    cfg = SamplerConfig(2000, -10.0, 10.0, mix_ratio=0.2, power=0.5)
    x, pdf = adjusted_density(cfg, sigmoid)
    dx = x[1] - x[0]
    assert float(np.sum(pdf * dx)) == pytest.approx(1.0)
    assert np.all(pdf >= 0)


def test_cdf_is_monotone_and_normalized():
    cfg = SamplerConfig(2000, -10.0, 10.0)
    x, cdf = adjusted_cdf(cfg, sigmoid)
    assert cdf[0] == 0.0
    assert cdf[-1] == pytest.approx(1.0)
    assert np.all(np.diff(cdf) >= 0)


def test_flat_target_with_zero_mix_is_degenerate():
    cfg = SamplerConfig(1000, -1.0, 1.0, mix_ratio=0.0)
    with pytest.raises(DegenerateDensity):
        adjusted_density(cfg, lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def test_step_target_with_mix_degrades_to_uniform():
    cfg = SamplerConfig(10_000, -6.0, 6.0, mix_ratio=0.2, power=0.5)
    samples = weighted_x_samples(cfg, np.sign, rng=0)
    uniform_cdf = lambda s: (s - cfg.x_low) / (cfg.x_high - cfg.x_low)
    assert ks_distance(samples, uniform_cdf) < 0.02


def test_zero_mix_limit_matches_pure_derivative_density():
    cfg = SamplerConfig(2000, -6.0, 6.0, mix_ratio=0.0, power=1.0)
    x, pdf = adjusted_density(cfg, sigmoid)
    raw = np.abs(np.gradient(sigmoid(x), x))
    raw = raw / np.sum(raw * (x[1] - x[0]))
    assert np.allclose(pdf, raw)


def test_samples_stay_in_range_and_sorted():
    cfg = SamplerConfig(5000, -10.0, 10.0)
    samples = weighted_x_samples(cfg, cauchy, rng=1)
    assert samples.size == cfg.n_samples
    assert np.all(samples >= cfg.x_low) and np.all(samples <= cfg.x_high)
    assert np.all(np.diff(samples) >= 0)


def test_sampling_is_deterministic_under_seed():
    cfg = SamplerConfig(500, -5.0, 5.0)
    a = weighted_x_samples(cfg, sigmoid, rng=7)
    b = weighted_x_samples(cfg, sigmoid, rng=7)
    assert np.array_equal(a, b)


def test_empirical_distribution_matches_adjusted_cdf():
    cfg = SamplerConfig(10_000, -10.0, 10.0, mix_ratio=0.2, power=0.5)
    x, cdf = adjusted_cdf(cfg, sigmoid)
    samples = weighted_x_samples(cfg, sigmoid, rng=42)
    assert ks_distance(samples, lambda s: np.interp(s, x, cdf)) < 0.02


def test_weighting_concentrates_near_steep_region():
    cfg = SamplerConfig(10_000, -10.0, 10.0, mix_ratio=0.2, power=0.5)
    for probe in (sigmoid, cauchy):
        samples = weighted_x_samples(cfg, probe, rng=3)
        weighted_mass = float(np.mean(np.abs(samples) < 2.0))
        uniform_mass = 4.0 / 20.0
        assert weighted_mass >= 1.2 * uniform_mass


def test_ks_distance_of_exact_cdf_sample_grid():
    # evenly spaced quantiles of U(0,1) have KS distance exactly 1/(2n)
    n = 100
    samples = (np.arange(n) + 0.5) / n
    assert ks_distance(samples, lambda s: s) == pytest.approx(1.0 / (2 * n))
