import numpy as np
import pytest
from sklearn.base import clone

from gaitbreath.errors import ParameterError, SelectionError
from gaitbreath.selection import (
    InformativeChannelSelector,
    periodicity_index,
    select_informative,
    welch_psd,
)

FS = 30.0


class TestWelchPsd:
    def test_peak_bin_location(self):
        t = np.arange(int(60 * FS)) / FS
        spec = welch_psd(np.sin(2 * np.pi * 0.25 * t), FS)
        peak = spec.freqs[int(np.argmax(spec.power))]
        assert abs(peak - 0.25) <= spec.df

    def test_zero_signal_zero_power(self):
        spec = welch_psd(np.zeros(600), FS)
        assert np.allclose(spec.power, 0.0)

    def test_white_noise_parseval(self):
        ratios = []
        for seed in range(100):
            x = np.random.default_rng(seed).normal(size=int(60 * FS))
            spec = welch_psd(x, FS)
            ratios.append(spec.power.sum() * spec.df / x.var())
        assert 0.9 <= np.mean(ratios) <= 1.1

    def test_shift_by_full_periods_invariant(self):
        t = np.arange(int(64 * FS)) / FS
        x = np.sin(2 * np.pi * 0.25 * t)
        period = int(FS / 0.25)
        y = np.sin(2 * np.pi * 0.25 * (t + period / FS))
        p1 = welch_psd(x, FS).power
        p2 = welch_psd(y, FS).power
        assert np.abs(p1 - p2).max() <= 1e-9 * max(p1.max(), 1e-300)

    def test_too_short_signal(self):
        with pytest.raises(ParameterError, match="shorter"):
            welch_psd(np.zeros(100), FS, nperseg=240)

    def test_bad_window_name(self):
        with pytest.raises(ParameterError):
            welch_psd(np.zeros(600), FS, window="blackman")

    def test_hann_window_supported(self):
        t = np.arange(int(60 * FS)) / FS
        spec = welch_psd(np.sin(2 * np.pi * 0.25 * t), FS, window="hann")
        peak = spec.freqs[int(np.argmax(spec.power))]
        assert abs(peak - 0.25) <= spec.df


class TestPeriodicityIndex:
    def test_long_window_sine_concentrates(self):
        t = np.arange(int(120 * FS)) / FS
        x = np.sin(2 * np.pi * 0.3 * t)
        spec = welch_psd(x, FS, nperseg=int(10 * FS))  # 0.3 Hz lands on the grid
        assert periodicity_index(spec) >= 0.9

    def test_white_noise_low_in_expectation(self):
        vals = []
        for seed in range(100):
            x = np.random.default_rng(seed).normal(size=int(120 * FS))
            spec = welch_psd(x, FS, nperseg=x.size)
            vals.append(periodicity_index(spec))
        assert np.mean(vals) < 0.2

    def test_zero_power_defined_as_zero(self):
        spec = welch_psd(np.zeros(600), FS)
        assert periodicity_index(spec) == 0.0

    def test_upper_bound_with_harmonic(self):
        for seed in range(20):
            x = np.random.default_rng(seed).normal(size=int(30 * FS))
            spec = welch_psd(x, FS)
            idx = periodicity_index(spec)
            band = (spec.freqs >= 0.167) & (spec.freqs <= 0.667)
            total = spec.power[band].sum()
            fm = spec.freqs[band][int(np.argmax(spec.power[band]))]
            harmonic = 0.0
            if 2 * fm <= spec.freqs[-1]:
                harmonic = spec.power[int(np.argmin(np.abs(spec.freqs - 2 * fm)))]
            assert idx <= 1.0 + harmonic / total + 1e-12

    def test_band_not_covered(self):
        spec = welch_psd(np.zeros(600), FS)
        with pytest.raises(ParameterError):
            periodicity_index(spec, band=(40.0, 50.0))


class TestSelectInformative:
    def test_sine_beats_noise_in_seeded_trials(self):
        correct = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            t = np.arange(int(30 * FS)) / FS
            channels = rng.normal(size=(6, t.size))
            k = seed % 6
            channels[k] = np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 2 * np.pi))
            sel = select_informative(channels, FS, nperseg=t.size)
            correct += sel.channel == k
        assert correct >= 99

    def test_identical_channels_tie_breaks_to_first(self):
        t = np.arange(int(20 * FS)) / FS
        x = np.sin(2 * np.pi * 0.25 * t)
        sel = select_informative(np.vstack([x] * 6), FS)
        assert sel.channel == 0
        assert sel.channel_name == "chest_pelvis"

    def test_argmax_of_crafted_indices(self):
        rng = np.random.default_rng(0)
        t = np.arange(int(30 * FS)) / FS
        sine = np.sin(2 * np.pi * 0.25 * t)
        channels = np.vstack(
            [0.2 * sine + rng.normal(size=t.size) * s for s in (1.0, 0.5, 0.05, 0.8, 0.6, 0.4)]
        )
        sel = select_informative(channels, FS, nperseg=t.size)
        assert sel.channel == int(np.argmax(sel.indices))
        assert sel.channel == 2

    def test_scaling_single_channel_invariance(self):
        rng = np.random.default_rng(4)
        t = np.arange(int(30 * FS)) / FS
        channels = rng.normal(size=(6, t.size))
        channels[3] = np.sin(2 * np.pi * 0.3 * t)
        base = select_informative(channels, FS).channel
        for k in (0.1, 10.0):
            scaled = channels.copy()
            scaled[3] *= k
            assert select_informative(scaled, FS).channel == base

    def test_negation_invariance(self):
        t = np.arange(int(30 * FS)) / FS
        x = np.sin(2 * np.pi * 0.3 * t)
        spec_pos = welch_psd(x, FS)
        spec_neg = welch_psd(-x, FS)
        assert periodicity_index(spec_pos) == pytest.approx(periodicity_index(spec_neg), abs=1e-12)

    def test_unusable_channels_skipped(self):
        t = np.arange(int(20 * FS)) / FS
        channels = np.vstack([np.sin(2 * np.pi * 0.25 * t)] * 6)
        usable = np.array([False, True, True, True, True, True])
        sel = select_informative(channels, FS, usable=usable)
        assert sel.channel == 1
        assert sel.indices[0] == 0.0

    def test_no_usable_channel(self):
        with pytest.raises(SelectionError):
            select_informative(np.zeros((6, 600)), FS, usable=np.zeros(6, dtype=bool))


class TestSelectorEstimator:
    def test_transform_returns_signal(self):
        rng = np.random.default_rng(1)
        t = np.arange(int(20 * FS)) / FS
        channels = rng.normal(size=(6, t.size))
        channels[2] = np.sin(2 * np.pi * 0.3 * t)
        est = InformativeChannelSelector(fs=FS, nperseg=t.size)
        out = est.fit_transform(channels)
        assert out.shape == (t.size,)
        assert est.selection_.channel == 2

    def test_clone(self):
        est = clone(InformativeChannelSelector(fs=15.0, window="hann"))
        assert est.get_params()["window"] == "hann"
