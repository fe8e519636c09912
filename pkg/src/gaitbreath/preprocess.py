"""Per-channel cleanup: outlier/gap repair, least-squares detrend, bandpass.

The three steps run in that order on each channel. The passband default is
0.167-0.667 Hz, matching the plausible breathing range of a walking adult.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt
from sklearn.base import BaseEstimator, TransformerMixin

from .data_io import CHANNEL_NAMES, RawChannels
from .errors import ParameterError, UnusableChannelError
from .validation import as_channel_matrix, as_float_vector, check_band, check_frame_rate

BREATH_BAND = (0.167, 0.667)

_MAD_SCALE = 1.4826  # MAD of a normal distribution -> standard deviation


@dataclass
class CleanChannels:
    """Fully repaired, detrended and bandpassed channels (no mask remains).

    Channels that could not be repaired are zeroed and flagged in ``usable``.
    """

    frame_rate: float
    values: np.ndarray  # (n_channels, T) float
    usable: np.ndarray  # (n_channels,) bool
    channel_names: tuple = CHANNEL_NAMES

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


def robust_z(x: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """|x - median| / (1.4826 * MAD), with the stats taken over ``reference``.

    When the MAD is zero, any value different from the median scores inf.
    """
    ref = x if reference is None else reference
    med = np.median(ref)
    mad = np.median(np.abs(ref - med))
    dev = np.abs(x - med)
    denom = _MAD_SCALE * mad
    if denom == 0:
        return np.where(dev == 0, 0.0, np.inf)
    return dev / denom


def repair_outliers(x, mask=None, z_thresh: float = 3.5) -> np.ndarray:
    """Replace masked samples and robust-z outliers by linear interpolation.

    Boundary runs are extended with the nearest surviving value. Raises
    :class:`UnusableChannelError` when fewer than two samples survive.
    """
    x = as_float_vector(x)
    if z_thresh <= 0:
        raise ParameterError(f"z_thresh must be positive, got {z_thresh}")
    if mask is None:
        mask = np.zeros(x.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ParameterError("mask shape does not match signal shape")
    mask = mask | ~np.isfinite(x)

    candidates = ~mask
    if candidates.sum() < 2:
        raise UnusableChannelError(f"only {int(candidates.sum())} unmasked samples, need >= 2")
    z = np.zeros(x.shape)
    z[candidates] = robust_z(x[candidates])
    surviving = candidates & (z <= z_thresh)
    if surviving.sum() < 2:
        raise UnusableChannelError(
            f"only {int(surviving.sum())} samples survive outlier screening, need >= 2"
        )

    idx = np.arange(x.size)
    return np.interp(idx, idx[surviving], x[surviving])


def detrend_least_squares(x) -> np.ndarray:
    """Subtract the ordinary-least-squares straight-line fit from ``x``."""
    x = as_float_vector(x)
    if x.size < 2:
        raise ParameterError(f"detrend needs at least 2 samples, got {x.size}")
    t = np.arange(x.size, dtype=float)
    tc = t - t.mean()
    slope = (tc @ x) / (tc @ tc)
    return x - (x.mean() + slope * tc)


def design_bandpass(fs: float, order: int = 4, band=BREATH_BAND) -> np.ndarray:
    """Second-order sections of a Butterworth bandpass of the given total order."""
    fs = check_frame_rate(fs, "fs")
    lo, hi = check_band(band, fs=fs)
    if order < 2 or order % 2 != 0:
        raise ParameterError(f"bandpass order must be an even integer >= 2, got {order}")
    return butter(order // 2, [lo, hi], btype="bandpass", fs=fs, output="sos")


def bandpass(x, fs: float, order: int = 4, band=BREATH_BAND, pad_seconds: float = 3.0) -> np.ndarray:
    """Zero-phase Butterworth bandpass (forward-backward, reflect padding)."""
    x = as_float_vector(x)
    sos = design_bandpass(fs, order=order, band=band)
    if x.size < 10 * order:
        raise ParameterError(f"signal length {x.size} < 10x filter order {order}")
    pad = min(int(round(pad_seconds * fs)), x.size - 1)
    xp = np.pad(x, pad, mode="reflect") if pad > 0 else x
    y = sosfiltfilt(sos, xp, padlen=0)
    return y[pad : pad + x.size] if pad > 0 else y


def preprocess_channel(
    x,
    fs: float,
    mask=None,
    z_thresh: float = 3.5,
    order: int = 4,
    band=BREATH_BAND,
    pad_seconds: float = 3.0,
) -> np.ndarray:
    repaired = repair_outliers(x, mask=mask, z_thresh=z_thresh)
    detrended = detrend_least_squares(repaired)
    return bandpass(detrended, fs, order=order, band=band, pad_seconds=pad_seconds)


def preprocess_matrix(
    values,
    valid,
    fs: float,
    z_thresh: float = 3.5,
    order: int = 4,
    band=BREATH_BAND,
    pad_seconds: float = 3.0,
    channel_names=CHANNEL_NAMES,
) -> CleanChannels:
    """Run repair -> detrend -> bandpass on each row of a channel matrix.

    Channels that fail repair are zeroed and flagged; the sample as a whole
    fails only when every channel is unusable.
    """
    values = np.asarray(values, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    n_channels, t = values.shape
    out = np.zeros((n_channels, t))
    usable = np.zeros(n_channels, dtype=bool)
    last_error = None
    for c in range(n_channels):
        try:
            out[c] = preprocess_channel(
                values[c],
                fs,
                mask=~valid[c],
                z_thresh=z_thresh,
                order=order,
                band=band,
                pad_seconds=pad_seconds,
            )
            usable[c] = True
        except UnusableChannelError as e:
            last_error = e
    if not usable.any():
        raise UnusableChannelError(f"all channels unusable; last failure: {last_error}")
    return CleanChannels(frame_rate=fs, values=out, usable=usable, channel_names=channel_names)


def preprocess_all(
    raw: RawChannels,
    z_thresh: float = 3.5,
    order: int = 4,
    band=BREATH_BAND,
    pad_seconds: float = 3.0,
) -> CleanChannels:
    """Repair, detrend and bandpass all six extracted channels."""
    return preprocess_matrix(
        raw.values,
        raw.valid,
        raw.frame_rate,
        z_thresh=z_thresh,
        order=order,
        band=band,
        pad_seconds=pad_seconds,
    )


class ChannelPreprocessor(TransformerMixin, BaseEstimator):
    """Stateless sklearn-style transformer wrapping :func:`preprocess_all`.

    ``transform`` accepts a (n_channels, T) matrix with NaN marking masked
    samples, or a sequence of such matrices, and returns the cleaned
    array(s). The sampling rate is a constructor parameter because array
    input carries no time base.
    """

    def __init__(self, fs=30.0, z_thresh=3.5, filter_order=4, band=BREATH_BAND, pad_seconds=3.0):
        self.fs = fs
        self.z_thresh = z_thresh
        self.filter_order = filter_order
        self.band = band
        self.pad_seconds = pad_seconds

    def fit(self, X, y=None):
        check_frame_rate(self.fs, "fs")
        check_band(self.band, fs=self.fs)
        return self

    def transform(self, X):
        check_frame_rate(self.fs, "fs")
        check_band(self.band, fs=self.fs)
        if isinstance(X, np.ndarray) and X.ndim <= 2:
            return self._transform_one(X)
        return [self._transform_one(item) for item in X]

    def _transform_one(self, X):
        X = as_channel_matrix(X, allow_nan=True)
        out = np.zeros_like(X)
        for c in range(X.shape[0]):
            out[c] = preprocess_channel(
                np.nan_to_num(X[c]),
                self.fs,
                mask=np.isnan(X[c]),
                z_thresh=self.z_thresh,
                order=self.filter_order,
                band=self.band,
                pad_seconds=self.pad_seconds,
            )
        return out
