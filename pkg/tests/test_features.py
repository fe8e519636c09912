import numpy as np
import pytest

from gaitbreath.errors import FeatureError
from gaitbreath.features import (
    FEATURE_NAMES,
    BreathFeatureExtractor,
    autocorrelation,
    extract_features,
    feature_dict,
)

FS = 30.0


def sine(f=0.25, seconds=30.0, amp=1.0, phase=0.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * f * t + phase)


def test_respiratory_rate_exact_on_grid():
    d = feature_dict(extract_features(sine(0.25), FS))
    assert d["respiratory_rate_bpm"] == 15.0


def test_sine_statistics():
    for amp in (1.0, 2.5):
        d = feature_dict(extract_features(sine(0.25, amp=amp), FS))
        assert d["rms"] == pytest.approx(amp / np.sqrt(2), rel=0.01)
        assert d["peak_to_peak"] == pytest.approx(2 * amp, rel=0.02)


def test_zero_signal_conventions():
    vec = extract_features(np.zeros(int(10 * FS)), FS)
    d = feature_dict(vec)
    assert np.isfinite(vec).all()
    assert d["mean"] == 0.0
    assert d["std"] == 0.0
    assert d["rms"] == 0.0
    assert d["peak_to_peak"] == 0.0
    assert d["spectral_entropy"] == 0.0


def test_too_short_signal():
    with pytest.raises(FeatureError):
        extract_features(np.zeros(int(4 * FS)), FS)


def test_whole_period_shift_invariance():
    base = extract_features(sine(0.25, seconds=40.0), FS)
    shifted = extract_features(sine(0.25, seconds=40.0, phase=2 * np.pi), FS)
    for name, a, b in zip(FEATURE_NAMES, base, shifted):
        if abs(a) < 1e-9:
            assert abs(b) < 1e-9, name
        else:
            assert abs(b - a) <= 0.02 * abs(a), name


def test_entropy_and_rate_invariants():
    for seed in range(20):
        x = np.random.default_rng(seed).normal(size=int(20 * FS))
        d = feature_dict(extract_features(x, FS))
        assert 0.0 <= d["spectral_entropy"] <= 1.0
        assert 10.0 <= d["respiratory_rate_bpm"] <= 40.1


def test_entropy_extremes():
    pure = feature_dict(extract_features(sine(0.25, seconds=60.0), FS))
    assert pure["spectral_entropy"] < 0.1
    noise = np.random.default_rng(0).normal(size=int(120 * FS))
    noisy = feature_dict(extract_features(noise, FS))
    assert noisy["spectral_entropy"] > 0.5


def test_autocorrelation_against_direct_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=256)
    r = autocorrelation(x)
    direct = np.correlate(x, x, mode="full")[x.size - 1 :] / (x @ x)
    assert r[0] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(r - direct).max() < 1e-9


def test_autocorrelation_zero_signal():
    assert np.allclose(autocorrelation(np.zeros(64)), 0.0)


def test_feature_vector_length_and_names():
    vec = extract_features(sine(), FS)
    assert vec.shape == (15,)
    assert len(FEATURE_NAMES) == 15
    assert len(set(FEATURE_NAMES)) == 15


def test_extractor_estimator_batches():
    est = BreathFeatureExtractor(fs=FS)
    X = est.fit_transform([sine(0.25), sine(0.3, amp=2.0)])
    assert X.shape == (2, 15)
    assert X[1, 2] > X[0, 2]  # larger amplitude, larger rms
