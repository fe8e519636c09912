"""Input validation helpers used by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_channel_matrix(X, name: str = "X", allow_nan: bool = False) -> np.ndarray:
    """Coerce to a 2-D float64 (n_channels, n_samples) array.

    NaN marks a masked sample and is only allowed when ``allow_nan`` is set.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be a (n_channels, n_samples) matrix, got shape {arr.shape}")
    if np.isinf(arr).any():
        raise ParameterError(f"{name} contains non-finite values")
    if not allow_nan and np.isnan(arr).any():
        raise ParameterError(f"{name} contains NaN but masked input is not accepted here")
    return arr


def check_frame_rate(fs, name: str = "frame_rate") -> float:
    fs = float(fs)
    if not np.isfinite(fs) or fs <= 0:
        raise ParameterError(f"{name} must be a positive finite number, got {fs}")
    return fs


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


def check_band(band, fs: float | None = None) -> tuple[float, float]:
    """Validate a (low, high) passband in Hz, optionally against a sampling rate."""
    lo, hi = (float(band[0]), float(band[1]))
    if not (0 < lo < hi):
        raise ParameterError(f"passband must satisfy 0 < low < high, got {band}")
    if fs is not None and fs <= 2.0 * hi:
        raise ParameterError(
            f"sampling rate {fs} Hz is too low for passband upper edge {hi} Hz (need fs > {2.0 * hi})"
        )
    return lo, hi
