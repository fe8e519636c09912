"""Welch power spectra and periodicity-based informative-channel selection.

The periodicity index is the in-band power at the dominant frequency plus
its second harmonic, divided by the total in-band power. The channel with
the largest index carries the clearest breathing rhythm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data_io import CHANNEL_NAMES
from .errors import ParameterError, SelectionError
from .preprocess import BREATH_BAND
from .validation import as_channel_matrix, as_float_vector, check_frame_rate

DEFAULT_WINDOW_SECONDS = 8.0
DEFAULT_OVERLAP = 0.5
DEFAULT_WINDOW = "boxcar"

_WINDOWS = {
    "boxcar": np.ones,
    "hann": lambda n: 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n),
}


@dataclass
class PowerSpectrum:
    """One-sided power spectral density with the estimation settings kept."""

    freqs: np.ndarray  # Hz, strictly increasing from 0
    power: np.ndarray  # density, >= 0
    window_length: int
    overlap: int
    window: str

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass
class SelectionResult:
    """Chosen channel plus the per-channel periodicity indices."""

    channel: int
    channel_name: str
    indices: np.ndarray  # one index per channel, 0.0 for unusable channels
    signal: np.ndarray  # the selected time series


def welch_psd(
    x,
    fs: float,
    nperseg: int | None = None,
    overlap: float = DEFAULT_OVERLAP,
    window: str = DEFAULT_WINDOW,
) -> PowerSpectrum:
    """Average of windowed segment periodograms, density-scaled.

    ``nperseg`` defaults to min(len(x), 8 seconds). The scaling is chosen so
    that sum(power) * df approximates the signal mean square (Parseval).
    """
    x = as_float_vector(x)
    fs = check_frame_rate(fs, "fs")
    if window not in _WINDOWS:
        raise ParameterError(f"window must be one of {sorted(_WINDOWS)}, got '{window}'")
    if not 0.0 <= overlap < 1.0:
        raise ParameterError(f"overlap must be in [0, 1), got {overlap}")
    if nperseg is None:
        nperseg = min(x.size, int(round(DEFAULT_WINDOW_SECONDS * fs)))
    nperseg = int(nperseg)
    if nperseg < 2:
        raise ParameterError(f"window length must be >= 2 samples, got {nperseg}")
    if x.size < nperseg:
        raise ParameterError(f"signal length {x.size} is shorter than the window {nperseg}")

    win = _WINDOWS[window](nperseg)
    step = max(nperseg - int(np.floor(overlap * nperseg)), 1)
    starts = range(0, x.size - nperseg + 1, step)
    scale = 1.0 / (fs * float(win @ win))

    acc = np.zeros(nperseg // 2 + 1)
    count = 0
    for s in starts:
        seg = x[s : s + nperseg] * win
        spec = np.abs(np.fft.rfft(seg)) ** 2
        acc += spec
        count += 1
    power = acc * (scale / count)
    power[1:] *= 2.0
    if nperseg % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not duplicated
    freqs = np.fft.rfftfreq(nperseg, d=1.0 / fs)
    return PowerSpectrum(
        freqs=freqs,
        power=power,
        window_length=nperseg,
        overlap=nperseg - step,
        window=window,
    )


def band_mask(freqs: np.ndarray, band=BREATH_BAND) -> np.ndarray:
    lo, hi = band
    return (freqs >= lo) & (freqs <= hi)


def periodicity_index(spec: PowerSpectrum, band=BREATH_BAND) -> float:
    """(P[fm] + P[2 fm]) / sum of in-band power, fm the in-band peak.

    The harmonic term reads the bin nearest 2*fm and is 0 when 2*fm lies
    beyond the spectrum; zero in-band power defines the index as 0.
    """
    inb = band_mask(spec.freqs, band)
    if not inb.any():
        raise ParameterError(f"spectrum does not cover the band {band}")
    pband = spec.power[inb]
    total = float(pband.sum())
    if total <= 0.0:
        return 0.0
    peak = int(np.argmax(pband))
    fm = float(spec.freqs[inb][peak])
    harmonic = 0.0
    if 2.0 * fm <= spec.freqs[-1]:
        harmonic = float(spec.power[int(np.argmin(np.abs(spec.freqs - 2.0 * fm)))])
    return (float(pband[peak]) + harmonic) / total


def select_informative(
    values,
    fs: float,
    usable=None,
    band=BREATH_BAND,
    nperseg: int | None = None,
    overlap: float = DEFAULT_OVERLAP,
    window: str = DEFAULT_WINDOW,
    channel_names=CHANNEL_NAMES,
) -> SelectionResult:
    """Pick the channel with the largest periodicity index.

    Ties resolve to the earliest channel in the canonical order. Channels
    flagged unusable score 0 and are never chosen unless none is usable,
    which raises :class:`SelectionError`.
    """
    values = as_channel_matrix(values, "values")
    n_channels = values.shape[0]
    if usable is None:
        usable = np.ones(n_channels, dtype=bool)
    usable = np.asarray(usable, dtype=bool)
    if usable.shape != (n_channels,):
        raise ParameterError("usable flags must have one entry per channel")
    if not usable.any():
        raise SelectionError("no usable channel to select from")

    indices = np.zeros(n_channels)
    for c in range(n_channels):
        if not usable[c]:
            continue
        spec = welch_psd(values[c], fs, nperseg=nperseg, overlap=overlap, window=window)
        indices[c] = periodicity_index(spec, band)

    ranked = np.where(usable, indices, -1.0)
    chosen = int(np.argmax(ranked))
    name = channel_names[chosen] if chosen < len(channel_names) else str(chosen)
    return SelectionResult(channel=chosen, channel_name=name, indices=indices, signal=values[chosen].copy())


class InformativeChannelSelector(TransformerMixin, BaseEstimator):
    """Sklearn-style transformer reducing (n_channels, T) to the chosen (T,).

    After ``transform`` the last selection is available as ``selection_``.
    """

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
        if isinstance(X, np.ndarray) and X.ndim <= 2:
            return self._transform_one(X)
        return [self._transform_one(item) for item in X]

    def _transform_one(self, X):
        result = select_informative(
            X,
            self.fs,
            band=self.band,
            nperseg=self.nperseg,
            overlap=self.overlap,
            window=self.window,
        )
        self.selection_ = result
        return result.signal
