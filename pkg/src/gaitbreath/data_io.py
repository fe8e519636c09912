"""On-disk formats: depth recordings, joint tracks, channel CSVs, models, reports.

A recorded walk lives in one directory:

* ``meta.json``   – width, height, frame_rate, frame_count, subject_id, label
* ``depth.bin``   – frame-major, row-major little-endian u16 millimeters (0 = missing)
* ``joints.csv``  – header ``frame,joint,x,y``; empty x/y cells mean the joint
  was not tracked in that frame

Channel files are plain CSV with the fixed header
``t,chest_pelvis,chest_nose,abdomen_pelvis,abdomen_nose,chestwall_pelvis,chestwall_nose``;
``t`` is seconds and empty cells mark masked samples.

All readers validate invariants and raise :class:`FormatError` naming the
offending field. All writers are the exact inverse of their reader.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

JOINT_NAMES = ("nose", "pelvis", "left_shoulder", "right_shoulder", "spine_chest", "spine_navel")
CHANNEL_NAMES = (
    "chest_pelvis",
    "chest_nose",
    "abdomen_pelvis",
    "abdomen_nose",
    "chestwall_pelvis",
    "chestwall_nose",
)
LABELS = ("normal", "deep")

_META_FIELDS = ("width", "height", "frame_rate", "frame_count", "subject_id", "label")


@dataclass
class DepthFrameSequence:
    """A stack of u16 depth frames in millimeters; pixel value 0 means missing."""

    width: int
    height: int
    frame_rate: float
    frames: np.ndarray  # (n_frames, height, width) uint16

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.uint16)
        if self.frames.ndim != 3:
            raise FormatError(f"frames must be 3-D (n, h, w), got shape {self.frames.shape}")
        n, h, w = self.frames.shape
        if (h, w) != (self.height, self.width):
            raise FormatError(
                f"frame shape {h}x{w} does not match declared height/width {self.height}x{self.width}"
            )
        if n < 2:
            raise FormatError(f"frame_count must be >= 2, got {n}")
        if not (self.frame_rate > 0):
            raise FormatError(f"frame_rate must be > 0, got {self.frame_rate}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class JointTrack:
    """Per-frame 2-D pixel locations for the tracked joints; NaN means absent.

    ``positions[name]`` is an (n_frames, 2) float array of (x=column, y=row).
    """

    positions: dict[str, np.ndarray]
    width: int
    height: int

    def __post_init__(self):
        for name in JOINT_NAMES:
            if name not in self.positions:
                raise FormatError(f"joint track missing joint '{name}'")
            arr = np.asarray(self.positions[name], dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise FormatError(f"joint '{name}' must be an (n_frames, 2) array")
            present = ~np.isnan(arr).any(axis=1)
            x, y = arr[present, 0], arr[present, 1]
            if ((x < 0) | (x >= self.width) | (y < 0) | (y >= self.height)).any():
                raise FormatError(f"joint '{name}' has locations outside frame bounds")
            self.positions[name] = arr
        lengths = {self.positions[n].shape[0] for n in JOINT_NAMES}
        if len(lengths) != 1:
            raise FormatError("joint tracks have inconsistent frame counts")

    @property
    def n_frames(self) -> int:
        return self.positions[JOINT_NAMES[0]].shape[0]

    def present(self, name: str, t: int) -> bool:
        return not np.isnan(self.positions[name][t]).any()


@dataclass
class DepthSample:
    """One recorded walk: depth frames, joint track and the class label."""

    id: str
    subject_id: str
    label: str
    depth: DepthFrameSequence
    joints: JointTrack

    def __post_init__(self):
        if self.label not in LABELS:
            raise FormatError(f"label must be one of {LABELS}, got '{self.label}'")
        if self.joints.n_frames != self.depth.n_frames:
            raise FormatError(
                f"joint frame count {self.joints.n_frames} does not match "
                f"depth frame count {self.depth.n_frames}"
            )


@dataclass
class RawChannels:
    """Six ROI-minus-stable-point depth signals with a per-sample validity mask."""

    frame_rate: float
    values: np.ndarray  # (6, T) float millimeters, value at masked cells unspecified
    valid: np.ndarray  # (6, T) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise FormatError("values and validity mask shapes differ")
        if self.values.shape[0] != len(CHANNEL_NAMES):
            raise FormatError(f"expected {len(CHANNEL_NAMES)} channels, got {self.values.shape[0]}")
        if not (self.frame_rate > 0):
            raise FormatError(f"frame_rate must be > 0, got {self.frame_rate}")
        if np.isinf(self.values[self.valid]).any() or np.isnan(self.values[self.valid]).any():
            raise FormatError("unmasked channel values must be finite")

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# depth sample directory


def write_depth_sample(sample: DepthSample, path) -> None:
    """Write meta.json, depth.bin and joints.csv into ``path`` (created if needed)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "width": sample.depth.width,
        "height": sample.depth.height,
        "frame_rate": sample.depth.frame_rate,
        "frame_count": sample.depth.n_frames,
        "subject_id": sample.subject_id,
        "label": sample.label,
    }
    write_json(path / "meta.json", meta)
    (path / "depth.bin").write_bytes(sample.depth.frames.astype("<u2").tobytes())
    with (path / "joints.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["frame", "joint", "x", "y"])
        for t in range(sample.joints.n_frames):
            for name in JOINT_NAMES:
                x, y = sample.joints.positions[name][t]
                if np.isnan(x) or np.isnan(y):
                    w.writerow([t, name, "", ""])
                else:
                    w.writerow([t, name, _fmt(x), _fmt(y)])


def read_depth_sample(path) -> DepthSample:
    """Read a sample directory written by :func:`write_depth_sample`.

    The sample id is the directory name. Missing-depth pixels stay 0.
    """
    path = Path(path)
    meta = _read_meta(path / "meta.json")
    width, height = meta["width"], meta["height"]
    n = meta["frame_count"]

    raw = _read_file(path / "depth.bin")
    expected = n * height * width * 2
    if len(raw) != expected:
        raise FormatError(
            f"depth.bin has {len(raw)} bytes, expected {expected} "
            f"({n} frames x {height}x{width} u16)"
        )
    frames = np.frombuffer(raw, dtype="<u2").reshape(n, height, width).astype(np.uint16)

    joints = _read_joints(path / "joints.csv", n, width, height)
    depth = DepthFrameSequence(width=width, height=height, frame_rate=meta["frame_rate"], frames=frames)
    return DepthSample(
        id=path.name,
        subject_id=meta["subject_id"],
        label=meta["label"],
        depth=depth,
        joints=joints,
    )


def _read_meta(path: Path) -> dict:
    try:
        meta = json.loads(_read_file(path).decode("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"meta.json is not valid JSON: {e}") from e
    for key in _META_FIELDS:
        if key not in meta:
            raise FormatError(f"meta.json missing field '{key}'")
    for key in ("width", "height", "frame_count"):
        if not isinstance(meta[key], int) or meta[key] < 1:
            raise FormatError(f"meta.json field '{key}' must be a positive integer")
    if meta["frame_count"] < 2:
        raise FormatError("meta.json field 'frame_count' must be >= 2")
    if not isinstance(meta["frame_rate"], (int, float)) or not meta["frame_rate"] > 0:
        raise FormatError("meta.json field 'frame_rate' must be > 0")
    if meta["label"] not in LABELS:
        raise FormatError(f"meta.json field 'label' must be one of {LABELS}")
    return meta


def _read_joints(path: Path, n_frames: int, width: int, height: int) -> JointTrack:
    positions = {name: np.full((n_frames, 2), np.nan) for name in JOINT_NAMES}
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame", "joint", "x", "y"]:
            raise FormatError(f"joints.csv header must be 'frame,joint,x,y', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"joints.csv line {lineno}: expected 4 fields, got {len(row)}")
            frame_s, joint, xs, ys = row
            try:
                t = int(frame_s)
            except ValueError as e:
                raise FormatError(f"joints.csv line {lineno}: bad frame index '{frame_s}'") from e
            if not 0 <= t < n_frames:
                raise FormatError(
                    f"joints.csv line {lineno}: frame {t} outside the 0..{n_frames - 1} "
                    f"range of a {n_frames}-frame sequence"
                )
            if joint not in JOINT_NAMES:
                raise FormatError(f"joints.csv line {lineno}: unknown joint '{joint}'")
            if xs == "" and ys == "":
                continue  # absent joint written explicitly
            try:
                positions[joint][t] = (float(xs), float(ys))
            except ValueError as e:
                raise FormatError(f"joints.csv line {lineno}: bad coordinates '{xs},{ys}'") from e
    return JointTrack(positions=positions, width=width, height=height)


# ---------------------------------------------------------------------------
# channel CSV (raw, clean and denoised signals share the layout)


def write_channels(channels: RawChannels, path) -> None:
    """Write a channel matrix as CSV; masked cells become empty fields."""
    path = Path(path)
    fs = channels.frame_rate
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(("t",) + CHANNEL_NAMES)
        for t in range(channels.n_samples):
            row = [_fmt(t / fs)]
            for c in range(len(CHANNEL_NAMES)):
                row.append(_fmt(channels.values[c, t]) if channels.valid[c, t] else "")
            w.writerow(row)


def read_channels(path) -> RawChannels:
    """Read a channel CSV back into :class:`RawChannels` (empty cell = masked)."""
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise FormatError("channels CSV is empty")
        header = [h.strip() for h in header]
        if header[:1] != ["t"]:
            raise FormatError("channels CSV first column must be 't'")
        for name in CHANNEL_NAMES:
            if name not in header:
                raise FormatError(f"channels CSV missing column '{name}'")
        col_of = {name: header.index(name) for name in CHANNEL_NAMES}
        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"channels CSV line {lineno}: expected {len(header)} fields")
            try:
                times.append(float(row[0]))
            except ValueError as e:
                raise FormatError(f"channels CSV line {lineno}: bad t value '{row[0]}'") from e
            rows.append([row[col_of[name]] for name in CHANNEL_NAMES])
    if len(times) < 2:
        raise FormatError("channels CSV needs at least 2 samples to recover the frame rate")
    t = np.asarray(times)
    if not (np.diff(t) > 0).all():
        raise FormatError("channels CSV column 't' must be strictly increasing")
    fs = _recover_rate(t)

    n = len(rows)
    values = np.zeros((len(CHANNEL_NAMES), n))
    valid = np.zeros((len(CHANNEL_NAMES), n), dtype=bool)
    for i, row in enumerate(rows):
        for c, cell in enumerate(row):
            if cell == "":
                continue
            try:
                values[c, i] = float(cell)
            except ValueError as e:
                raise FormatError(
                    f"channels CSV line {i + 2}: bad value '{cell}' in column "
                    f"'{CHANNEL_NAMES[c]}'"
                ) from e
            valid[c, i] = True
    return RawChannels(frame_rate=fs, values=values, valid=valid)


def write_signal(t_seconds: np.ndarray, values: np.ndarray, path) -> None:
    """Write a single selected signal as a two-column ``t,value`` CSV."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["t", "value"])
        for t, v in zip(t_seconds, values):
            w.writerow([_fmt(t), _fmt(v)])


def read_signal(path) -> tuple[np.ndarray, float]:
    """Read a ``t,value`` CSV, returning (values, frame_rate)."""
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise FormatError(f"signal CSV header must be 't,value', got {header}")
        times, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"signal CSV line {lineno}: expected 2 fields")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as e:
                raise FormatError(f"signal CSV line {lineno}: bad number") from e
    if len(times) < 2:
        raise FormatError("signal CSV needs at least 2 samples")
    return np.asarray(values), _recover_rate(np.asarray(times))


# ---------------------------------------------------------------------------
# manifests, models, reports


def write_manifest(paths, out_path) -> None:
    write_json(out_path, [str(p) for p in paths])


def read_manifest(path) -> list[Path]:
    path = Path(path)
    try:
        entries = json.loads(_read_file(path).decode("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e}") from e
    if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
        raise FormatError("manifest must be a JSON list of sample directory paths")
    base = path.parent
    return [base / e if not Path(e).is_absolute() else Path(e) for e in entries]


def write_json(path, obj) -> None:
    """Canonical JSON dump: sorted keys, fixed separators, trailing newline.

    Identical inputs always produce byte-identical files.
    """
    text = json.dumps(obj, sort_keys=True, indent=2, separators=(",", ": "), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(_read_file(Path(path)).decode("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e


def config_hash(config_dict: dict) -> str:
    """SHA-256 over the canonical JSON form of a configuration mapping."""
    text = json.dumps(config_dict, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _recover_rate(t: np.ndarray) -> float:
    """Frame rate from a seconds column; snaps to integer rates.

    Writers emit t = k / fs, so (n-1)/t_last reproduces fs up to the last
    float bit; for integer rates the snap makes the recovery exact, which
    keeps rewritten CSVs byte-identical.
    """
    fs = (len(t) - 1) / (t[-1] - t[0])
    if abs(fs - round(fs)) <= 1e-9 * fs:
        return float(round(fs))
    return float(fs)


def _read_file(path: Path) -> bytes:
    if not path.exists():
        raise FormatError(f"missing file: {path}")
    return path.read_bytes()


def _fmt(v: float) -> str:
    """Shortest decimal form that round-trips a float64 exactly."""
    return format(float(v), ".17g")


@dataclass
class ChannelMatrix:
    """Thin unmasked (n_channels, T) view used by stages past preprocessing."""

    frame_rate: float
    values: np.ndarray
    usable: np.ndarray = field(default=None)  # (n_channels,) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.usable is None:
            self.usable = np.ones(self.values.shape[0], dtype=bool)
        self.usable = np.asarray(self.usable, dtype=bool)


def channels_to_matrix(channels: RawChannels) -> ChannelMatrix:
    """Interpret a fully-valid-or-fully-empty channel CSV as an unmasked matrix.

    Channels with every cell masked are flagged unusable; partially masked
    channels are rejected because post-preprocessing signals carry no mask.
    """
    per_channel = channels.valid.all(axis=1)
    empty = ~channels.valid.any(axis=1)
    if not (per_channel | empty).all():
        bad = [CHANNEL_NAMES[i] for i in np.nonzero(~(per_channel | empty))[0]]
        raise FormatError(f"channels {bad} are partially masked; expected clean signals")
    values = np.where(channels.valid, channels.values, 0.0)
    return ChannelMatrix(frame_rate=channels.frame_rate, values=values, usable=per_channel)


def matrix_to_channels(matrix: ChannelMatrix) -> RawChannels:
    valid = np.repeat(matrix.usable[:, None], matrix.values.shape[1], axis=1)
    return RawChannels(frame_rate=matrix.frame_rate, values=matrix.values, valid=valid)
