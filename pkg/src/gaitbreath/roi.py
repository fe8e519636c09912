"""Torso ROIs, stable points, and the six raw relative-depth channels.

Geometry, per frame with all six joints tracked:

* chest      – rows from the mean shoulder row down to the spine_chest row,
  columns covering the inner 80% of the shoulder span
* abdomen    – rows from spine_chest down to spine_navel, same columns
* chest_wall – chest+abdomen rows, columns from the torso midline to the
  side nearer the camera (configurable, default right)

Each channel is the mean of the nonzero depth inside one ROI minus the
stable-point depth (median of the nonzero 3x3 patch around the pelvis or
nose pixel), so whole-body translation cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import CHANNEL_NAMES, DepthFrameSequence, JointTrack, RawChannels
from .errors import EmptySignalError, ParameterError

ROI_NAMES = ("chest", "abdomen", "chest_wall")
STABLE_NAMES = ("pelvis", "nose")

_INNER_SPAN = 0.8  # fraction of the shoulder span kept for torso columns


@dataclass
class RoiSet:
    """Per-frame ROI rectangles and stable-point pixels.

    ``rects[t, i]`` is (top, bottom, left, right) with inclusive pixel bounds,
    i indexing (chest, abdomen, chest_wall). ``points[t, j]`` is (x, y) for
    (pelvis, nose). ``valid[t]`` is False when the frame cannot supply the
    full geometry.
    """

    rects: np.ndarray  # (T, 3, 4) int
    points: np.ndarray  # (T, 2, 2) float
    valid: np.ndarray  # (T,) bool

    @property
    def n_frames(self) -> int:
        return self.valid.shape[0]


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def build_rois(joints: JointTrack, width: int, height: int, chestwall_side: str = "right") -> RoiSet:
    """Derive the three ROIs and two stable points for every frame.

    Frames missing a joint, with out-of-order torso rows, or with a
    rectangle clipped to zero area are flagged invalid instead of failing.
    """
    if chestwall_side not in ("left", "right"):
        raise ParameterError(f"chestwall_side must be 'left' or 'right', got '{chestwall_side}'")
    n = joints.n_frames
    if n == 0:
        raise ParameterError("joint track is empty")

    rects = np.zeros((n, 3, 4), dtype=int)
    points = np.full((n, 2, 2), np.nan)
    valid = np.zeros(n, dtype=bool)

    pos = joints.positions
    for t in range(n):
        if not all(joints.present(name, t) for name in pos):
            continue
        ls = pos["left_shoulder"][t]
        rs = pos["right_shoulder"][t]
        row_shoulder = _round_half_up((ls[1] + rs[1]) / 2.0)
        row_chest = _round_half_up(pos["spine_chest"][t][1])
        row_navel = _round_half_up(pos["spine_navel"][t][1])
        if not row_shoulder < row_chest < row_navel:
            continue

        x_lo, x_hi = sorted((ls[0], rs[0]))
        margin = (1.0 - _INNER_SPAN) / 2.0 * (x_hi - x_lo)
        col_left = _round_half_up(x_lo + margin)
        col_right = _round_half_up(x_hi - margin)
        mid = _round_half_up((ls[0] + rs[0]) / 2.0)
        mid = min(max(mid, col_left), col_right)
        if chestwall_side == "right":
            wall_cols = (mid, col_right)
        else:
            wall_cols = (col_left, mid)

        frame_rects = np.array(
            [
                (row_shoulder, row_chest, col_left, col_right),
                (row_chest, row_navel, col_left, col_right),
                (row_shoulder, row_navel, wall_cols[0], wall_cols[1]),
            ]
        )
        # intersect with the frame; an empty intersection invalidates the frame
        frame_rects[:, 0] = np.maximum(frame_rects[:, 0], 0)
        frame_rects[:, 1] = np.minimum(frame_rects[:, 1], height - 1)
        frame_rects[:, 2] = np.maximum(frame_rects[:, 2], 0)
        frame_rects[:, 3] = np.minimum(frame_rects[:, 3], width - 1)
        if ((frame_rects[:, 1] < frame_rects[:, 0]) | (frame_rects[:, 3] < frame_rects[:, 2])).any():
            continue

        rects[t] = frame_rects
        points[t, 0] = pos["pelvis"][t]
        points[t, 1] = pos["nose"][t]
        valid[t] = True

    return RoiSet(rects=rects, points=points, valid=valid)


def _stable_depth(frame: np.ndarray, x: float, y: float) -> float:
    """Median of the nonzero 3x3 patch centered on the stable pixel; NaN if empty."""
    h, w = frame.shape
    cx, cy = _round_half_up(x), _round_half_up(y)
    patch = frame[max(cy - 1, 0) : min(cy + 2, h), max(cx - 1, 0) : min(cx + 2, w)]
    nz = patch[patch > 0]
    if nz.size == 0:
        return np.nan
    return float(np.median(nz))


def extract_raw_channels(depth: DepthFrameSequence, rois: RoiSet) -> RawChannels:
    """Compute the six relative-depth channels from depth frames and ROIs.

    A (channel, frame) cell is masked when the frame is invalid, the ROI has
    no nonzero pixel, or the stable patch is entirely missing.
    """
    if rois.n_frames != depth.n_frames:
        raise ParameterError(
            f"ROI frame count {rois.n_frames} != depth frame count {depth.n_frames}"
        )
    n = depth.n_frames
    values = np.zeros((len(CHANNEL_NAMES), n))
    valid = np.zeros((len(CHANNEL_NAMES), n), dtype=bool)

    frames = depth.frames
    for t in range(n):
        if not rois.valid[t]:
            continue
        frame = frames[t]
        roi_means = np.full(len(ROI_NAMES), np.nan)
        for i in range(len(ROI_NAMES)):
            top, bottom, left, right = rois.rects[t, i]
            block = frame[top : bottom + 1, left : right + 1]
            count = np.count_nonzero(block)
            if count:
                roi_means[i] = block.sum(dtype=np.int64) / count
        stable = np.array([_stable_depth(frame, *rois.points[t, j]) for j in range(2)])

        for c in range(len(CHANNEL_NAMES)):
            i, j = divmod(c, 2)
            if np.isnan(roi_means[i]) or np.isnan(stable[j]):
                continue
            values[c, t] = roi_means[i] - stable[j]
            valid[c, t] = True

    if not valid.any():
        raise EmptySignalError("no frame produced a usable channel sample")
    return RawChannels(frame_rate=depth.frame_rate, values=values, valid=valid)
