"""The 15-dimensional descriptor of the selected breathing signal.

Four time-domain statistics, four short-term (1 s window) statistics, five
Welch-spectrum statistics restricted to the breathing band, plus the
standard deviation of the normalized autocorrelation sequence and the
respiratory rate in breaths per minute.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import FeatureError
from .preprocess import BREATH_BAND
from .selection import DEFAULT_OVERLAP, DEFAULT_WINDOW, band_mask, welch_psd
from .validation import as_float_vector, check_frame_rate

FEATURE_NAMES = (
    "mean",
    "std",
    "rms",
    "peak_to_peak",
    "st_energy_mean",
    "st_energy_std",
    "st_zerocross_mean",
    "st_zerocross_std",
    "spectral_centroid_hz",
    "spectral_bandwidth_hz",
    "spectral_entropy",
    "band_peak_ratio",
    "band_power",
    "autocorr_std",
    "respiratory_rate_bpm",
)

MIN_SIGNAL_SECONDS = 5.0


def short_term_windows(x: np.ndarray, fs: float) -> np.ndarray:
    """1-second windows with 50% overlap, as a (n_windows, win) view."""
    win = max(int(round(fs)), 2)
    hop = max(win // 2, 1)
    starts = range(0, x.size - win + 1, hop)
    return np.stack([x[s : s + win] for s in starts])


def zero_crossings(x: np.ndarray) -> int:
    """Count of strict sign changes between consecutive samples."""
    return int(np.sum(x[:-1] * x[1:] < 0))


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased autocorrelation over lags 0..T-1, normalized to 1 at lag 0.

    A zero-energy signal returns all zeros.
    """
    x = np.asarray(x, dtype=float)
    t = x.size
    energy = float(x @ x)
    if energy == 0.0:
        return np.zeros(t)
    padded = np.fft.rfft(x, 2 * t)
    r = np.fft.irfft(padded * np.conj(padded))[:t]
    return r / energy


def extract_features(
    x,
    fs: float,
    band=BREATH_BAND,
    nperseg: int | None = None,
    overlap: float = DEFAULT_OVERLAP,
    window: str = DEFAULT_WINDOW,
) -> np.ndarray:
    """Compute the 15 features of a selected signal, ordered as FEATURE_NAMES."""
    x = as_float_vector(x)
    fs = check_frame_rate(fs, "fs")
    if x.size < MIN_SIGNAL_SECONDS * fs:
        raise FeatureError(
            f"signal of {x.size} samples is shorter than {MIN_SIGNAL_SECONDS} s at {fs} Hz"
        )

    mean = float(x.mean())
    std = float(x.std())
    rms = float(np.sqrt(np.mean(x**2)))
    p2p = float(x.max() - x.min())

    wins = short_term_windows(x, fs)
    energies = np.sum(wins**2, axis=1)
    crossings = np.array([zero_crossings(w) for w in wins], dtype=float)

    spec = welch_psd(x, fs, nperseg=nperseg, overlap=overlap, window=window)
    inb = band_mask(spec.freqs, band)
    pband = spec.power[inb]
    fband = spec.freqs[inb]
    total = float(pband.sum())
    if total > 0.0:
        p = pband / total
        centroid = float(p @ fband)
        bandwidth = float(np.sqrt(p @ (fband - centroid) ** 2))
        nz = p[p > 0]
        entropy = float(-(nz @ np.log(nz)) / np.log(len(p))) if len(p) > 1 else 0.0
        peak_ratio = float(pband.max() / total)
    else:
        centroid = bandwidth = entropy = peak_ratio = 0.0
    band_power = total * spec.df
    rate_bpm = 60.0 * float(fband[int(np.argmax(pband))])

    return np.array(
        [
            mean,
            std,
            rms,
            p2p,
            float(energies.mean()),
            float(energies.std()),
            float(crossings.mean()),
            float(crossings.std()),
            centroid,
            bandwidth,
            entropy,
            peak_ratio,
            band_power,
            float(autocorrelation(x).std()),
            rate_bpm,
        ]
    )


def feature_dict(vec: np.ndarray) -> dict:
    return {name: float(v) for name, v in zip(FEATURE_NAMES, vec)}


class BreathFeatureExtractor(TransformerMixin, BaseEstimator):
    """Sklearn-style transformer: list of 1-D signals -> (n, 15) feature matrix."""

    def __init__(
        self,
        fs=30.0,
        band=BREATH_BAND,
        nperseg=None,
        overlap=DEFAULT_OVERLAP,
        window=DEFAULT_WINDOW,
    ):
        self.fs = fs
        self.band = band
        self.nperseg = nperseg
        self.overlap = overlap
        self.window = window

    def fit(self, X, y=None):
        check_frame_rate(self.fs, "fs")
        return self

    def transform(self, X):
        if isinstance(X, np.ndarray) and X.ndim == 1:
            X = [X]
        rows = [
            extract_features(
                x,
                self.fs,
                band=self.band,
                nperseg=self.nperseg,
                overlap=self.overlap,
                window=self.window,
            )
            for x in X
        ]
        return np.vstack(rows)
