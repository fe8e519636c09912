"""Synthetic walking-breath depth recordings with known ground truth.

A schematic torso approaches the camera from ~6 m to ~1 m. Chest and
abdomen rows carry the breathing sine split by per-subject mixing weights,
the whole body carries the walking bob, and the head and pelvis carry
independent slow sway so the stable-point references are imperfect, which
is what the graph denoiser is there to clean up. Per-pixel static texture
plus sensor noise and dropout complete the depth-camera behavior.

Everything is drawn from one seeded generator, so a configuration
reproduces its dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data_io import (
    JOINT_NAMES,
    DepthFrameSequence,
    DepthSample,
    JointTrack,
    write_depth_sample,
    write_json,
    write_manifest,
)
from .errors import ParameterError

# fixed pixel layout of the rendered person on the frame
_LAYOUT = {
    "nose": (48.0, 14.0),
    "left_shoulder": (28.0, 24.0),
    "right_shoulder": (68.0, 24.0),
    "spine_chest": (48.0, 40.0),
    "spine_navel": (48.0, 58.0),
    "pelvis": (48.0, 72.0),
}
_HEAD = (slice(8, 20), slice(40, 57))
_TORSO = (slice(20, 81), slice(24, 73))
_CHEST_ROWS = slice(24, 40)
_ABDOMEN_ROWS = slice(40, 59)
_PELVIS_ROWS = slice(59, 81)
_TEXTURE_MM = 3.0


@dataclass
class SynthConfig:
    """Knobs of the generator; defaults give the shipped 90-sample benchmark."""

    subjects: int = 15
    walks_per_class: int = 3
    fs: float = 30.0
    duration_range: tuple = (6.0, 18.0)
    rate_range: tuple = (0.2, 0.45)  # Hz, inside the breathing band
    normal_amplitude_mm: float = 10.0
    amplitude_jitter: float = 0.05  # per-subject relative spread
    deep_multiplier: float = 2.5
    step_frequency_hz: float = 1.8
    bob_amplitude_mm: float = 25.0
    sway_mm: float = 8.0  # head/pelvis slow wander (stable-point imperfection)
    deform_mm: float = 2.0  # independent chest/abdomen surface deformation
    sensor_noise_mm: float = 30.0
    dropout_probability: float = 0.01
    mixing_range: tuple = (0.1, 0.9)  # chest share of the breathing motion
    width: int = 96
    height: int = 96
    far_mm: float = 6000.0
    near_mm: float = 1000.0
    seed: int = 7

    def validate(self) -> "SynthConfig":
        lo, hi = self.duration_range
        if not (6.0 <= lo <= hi <= 18.0):
            raise ParameterError(f"duration_range must sit inside [6, 18] s, got {self.duration_range}")
        rlo, rhi = self.rate_range
        if not (0.167 <= rlo <= rhi <= 0.667):
            raise ParameterError(f"rate_range must sit inside [0.167, 0.667] Hz, got {self.rate_range}")
        if self.subjects < 1 or self.walks_per_class < 1:
            raise ParameterError("subjects and walks_per_class must be >= 1")
        if not (0.0 <= self.dropout_probability < 1.0):
            raise ParameterError("dropout_probability must be in [0, 1)")
        mlo, mhi = self.mixing_range
        if not (0.0 < mlo <= mhi < 1.0):
            raise ParameterError("mixing_range must sit strictly inside (0, 1)")
        if self.fs <= 2.0:
            raise ParameterError("fs must exceed 2 Hz to sample the breathing band")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("duration_range", "rate_range", "mixing_range"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown synth config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("duration_range", "rate_range", "mixing_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs).validate()


@dataclass
class SampleTruth:
    """Generator-side ground truth for one sample."""

    subject_id: str
    label: str
    rate_hz: float
    amplitude_mm: float
    phase: float
    chest_weight: float
    duration_s: float

    def breath(self, n: int, fs: float) -> np.ndarray:
        t = np.arange(n) / fs
        return self.amplitude_mm * np.sin(2 * np.pi * self.rate_hz * t + self.phase)


def _ou_process(n: int, fs: float, std: float, tau_s: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck path: slow wander with RMS ``std``."""
    if std == 0.0:
        return np.zeros(n)
    rho = np.exp(-1.0 / (tau_s * fs))
    x = np.empty(n)
    x[0] = rng.normal(0.0, std)
    innov = rng.normal(0.0, std * np.sqrt(1.0 - rho * rho), size=n - 1)
    for k in range(1, n):
        x[k] = rho * x[k - 1] + innov[k - 1]
    return x


def generate_dataset(cfg: SynthConfig, with_truth: bool = False):
    """Render the full dataset; returns samples, or (samples, truths)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    samples: list[DepthSample] = []
    truths: list[SampleTruth] = []

    for s in range(cfg.subjects):
        subject_id = f"S{s:02d}"
        w_chest = rng.uniform(*cfg.mixing_range)
        amp_subject = cfg.normal_amplitude_mm * (
            1.0 + rng.uniform(-cfg.amplitude_jitter, cfg.amplitude_jitter)
        )
        for label in ("normal", "deep"):
            amp = amp_subject * (cfg.deep_multiplier if label == "deep" else 1.0)
            for walk in range(cfg.walks_per_class):
                duration = rng.uniform(*cfg.duration_range)
                rate = rng.uniform(*cfg.rate_range)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                truth = SampleTruth(
                    subject_id=subject_id,
                    label=label,
                    rate_hz=rate,
                    amplitude_mm=amp,
                    phase=phase,
                    chest_weight=w_chest,
                    duration_s=duration,
                )
                sample_id = f"{subject_id}_{label}_{walk}"
                samples.append(_render_sample(sample_id, truth, cfg, rng))
                truths.append(truth)
    if with_truth:
        return samples, truths
    return samples


def _render_sample(
    sample_id: str, truth: SampleTruth, cfg: SynthConfig, rng: np.random.Generator
) -> DepthSample:
    n = max(int(round(truth.duration_s * cfg.fs)), 2)
    t = np.arange(n) / cfg.fs

    trunk = np.linspace(cfg.far_mm, cfg.near_mm, n)
    bob = cfg.bob_amplitude_mm * np.sin(2.0 * np.pi * cfg.step_frequency_hz * t + rng.uniform(0, 2 * np.pi))
    breath = truth.breath(n, cfg.fs)
    head_sway = _ou_process(n, cfg.fs, cfg.sway_mm, 1.2, rng)
    pelvis_sway = _ou_process(n, cfg.fs, cfg.sway_mm, 1.2, rng)
    chest_deform = _ou_process(n, cfg.fs, cfg.deform_mm, 1.2, rng)
    abdomen_deform = _ou_process(n, cfg.fs, cfg.deform_mm, 1.2, rng)

    depth = np.zeros((n, cfg.height, cfg.width))
    person = np.zeros((cfg.height, cfg.width), dtype=bool)
    person[_TORSO] = True
    person[_HEAD] = True

    base = trunk + bob
    depth[:, _TORSO[0], _TORSO[1]] = base[:, None, None]
    depth[:, _HEAD[0], _HEAD[1]] = (base + head_sway)[:, None, None]
    depth[:, _CHEST_ROWS, _TORSO[1]] += (truth.chest_weight * breath + chest_deform)[:, None, None]
    depth[:, _ABDOMEN_ROWS, _TORSO[1]] += ((1.0 - truth.chest_weight) * breath + abdomen_deform)[:, None, None]
    depth[:, _PELVIS_ROWS, _TORSO[1]] += pelvis_sway[:, None, None]

    texture = rng.uniform(-_TEXTURE_MM, _TEXTURE_MM, size=(cfg.height, cfg.width))
    depth[:, person] += texture[person]
    if cfg.sensor_noise_mm > 0:
        depth[:, person] += rng.normal(0.0, cfg.sensor_noise_mm, size=(n, int(person.sum())))

    frames = np.where(person[None, :, :], np.clip(np.round(depth), 1.0, 65535.0), 0.0)
    if cfg.dropout_probability > 0:
        frames[rng.random(frames.shape) < cfg.dropout_probability] = 0.0
    frames = frames.astype(np.uint16)

    positions = {
        name: np.tile(np.asarray(_LAYOUT[name]), (n, 1)) for name in JOINT_NAMES
    }
    return DepthSample(
        id=sample_id,
        subject_id=truth.subject_id,
        label=truth.label,
        depth=DepthFrameSequence(width=cfg.width, height=cfg.height, frame_rate=cfg.fs, frames=frames),
        joints=JointTrack(positions=positions, width=cfg.width, height=cfg.height),
    )


def write_dataset(samples, out_dir, config: SynthConfig | None = None) -> Path:
    """Write one directory per sample plus manifest.json (and the config used)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for sample in samples:
        write_depth_sample(sample, out_dir / sample.id)
        names.append(sample.id)
    write_manifest(names, out_dir / "manifest.json")
    if config is not None:
        write_json(out_dir / "synth_config.json", config.to_dict())
    return out_dir / "manifest.json"
