import numpy as np
import pytest

from gaitbreath.data_io import (
    CHANNEL_NAMES,
    JOINT_NAMES,
    DepthFrameSequence,
    DepthSample,
    JointTrack,
    RawChannels,
    channels_to_matrix,
    read_channels,
    read_depth_sample,
    read_json,
    read_manifest,
    read_signal,
    write_channels,
    write_depth_sample,
    write_json,
    write_manifest,
    write_signal,
)
from gaitbreath.errors import FormatError


def make_sample(n=4, w=5, h=6, seed=0, sample_id="walk01"):
    rng = np.random.default_rng(seed)
    frames = rng.integers(0, 4000, size=(n, h, w)).astype(np.uint16)
    positions = {
        name: np.column_stack([rng.uniform(0, w - 1, n), rng.uniform(0, h - 1, n)])
        for name in JOINT_NAMES
    }
    if n > 2:
        positions["nose"][2] = (np.nan, np.nan)  # dropout in one frame
    return DepthSample(
        id=sample_id,
        subject_id="S01",
        label="normal",
        depth=DepthFrameSequence(width=w, height=h, frame_rate=30.0, frames=frames),
        joints=JointTrack(positions=positions, width=w, height=h),
    )


def test_depth_sample_round_trip(tmp_path):
    sample = make_sample()
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    back = read_depth_sample(d)
    assert back.id == sample.id
    assert back.subject_id == "S01"
    assert back.label == "normal"
    assert back.depth.frame_rate == 30.0
    assert np.array_equal(back.depth.frames, sample.depth.frames)
    for name in JOINT_NAMES:
        a, b = sample.joints.positions[name], back.joints.positions[name]
        assert np.array_equal(np.isnan(a), np.isnan(b))
        assert np.allclose(a[~np.isnan(a)], b[~np.isnan(b)])


def test_depth_bin_truncation_error(tmp_path):
    sample = make_sample()
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    blob = (d / "depth.bin").read_bytes()
    (d / "depth.bin").write_bytes(blob[:-3])
    with pytest.raises(FormatError, match="depth.bin"):
        read_depth_sample(d)


def test_joint_frame_count_mismatch(tmp_path):
    sample = make_sample(n=2)
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    with (d / "joints.csv").open("a") as f:
        f.write("2,nose,1.0,1.0\n")
    with pytest.raises(FormatError, match="frame"):
        read_depth_sample(d)


def test_absent_joint_written_as_empty_fields(tmp_path):
    sample = make_sample(n=6)
    sample.joints.positions["nose"][5] = (np.nan, np.nan)
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    rows = (d / "joints.csv").read_text().splitlines()
    assert "5,nose,," in rows


def test_max_depth_value_encoding(tmp_path):
    sample = make_sample(n=2, w=2, h=2)
    sample.depth.frames[:] = 65535
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    blob = (d / "depth.bin").read_bytes()
    assert blob == b"\xff\xff" * (2 * 2 * 2)


def test_meta_validation_errors(tmp_path):
    sample = make_sample()
    d = tmp_path / sample.id
    write_depth_sample(sample, d)
    meta = read_json(d / "meta.json")
    for field, value, pattern in [
        ("label", "loud", "label"),
        ("frame_rate", 0, "frame_rate"),
        ("frame_count", 1, "frame_count"),
    ]:
        bad = dict(meta)
        bad[field] = value
        write_json(d / "meta.json", bad)
        with pytest.raises(FormatError, match=pattern):
            read_depth_sample(d)
    incomplete = dict(meta)
    del incomplete["subject_id"]
    write_json(d / "meta.json", incomplete)
    with pytest.raises(FormatError, match="subject_id"):
        read_depth_sample(d)


def make_channels(n=10, seed=1):
    rng = np.random.default_rng(seed)
    values = rng.normal(scale=10, size=(6, n))
    valid = rng.random((6, n)) > 0.1
    valid[:, 0] = True  # keep the time base anchored
    return RawChannels(frame_rate=30.0, values=values, valid=valid)


def test_channels_csv_line_count(tmp_path):
    ch = make_channels(n=10)
    p = tmp_path / "channels.csv"
    write_channels(ch, p)
    lines = p.read_text().strip().splitlines()
    assert len(lines) == 11  # header + 10 samples


def test_channels_round_trip(tmp_path):
    ch = make_channels()
    p = tmp_path / "channels.csv"
    write_channels(ch, p)
    back = read_channels(p)
    assert np.array_equal(back.valid, ch.valid)
    diff = np.abs(back.values[ch.valid] - ch.values[ch.valid]).max()
    assert diff < 1e-9
    assert abs(back.frame_rate - 30.0) < 1e-9


def test_channels_missing_column(tmp_path):
    ch = make_channels()
    p = tmp_path / "channels.csv"
    write_channels(ch, p)
    text = p.read_text().replace("abdomen_nose", "abdomen_bose")
    p.write_text(text)
    with pytest.raises(FormatError, match="abdomen_nose"):
        read_channels(p)


def test_channels_to_matrix_rejects_partial_mask():
    values = np.zeros((6, 5))
    valid = np.ones((6, 5), dtype=bool)
    valid[2, 3] = False
    with pytest.raises(FormatError, match="abdomen_pelvis"):
        channels_to_matrix(RawChannels(frame_rate=10.0, values=values, valid=valid))


def test_signal_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.normal(size=50)
    t = np.arange(50) / 30.0
    p = tmp_path / "selected.csv"
    write_signal(t, values, p)
    back, fs = read_signal(p)
    assert np.abs(back - values).max() < 1e-12
    assert abs(fs - 30.0) < 1e-9


def test_manifest_round_trip(tmp_path):
    p = tmp_path / "manifest.json"
    write_manifest(["a", "b/c"], p)
    back = read_manifest(p)
    assert [x.name for x in back] == ["a", "c"]
    assert all(x.parent == tmp_path or x.parent == tmp_path / "b" for x in back)


def test_write_json_deterministic(tmp_path):
    doc = {"b": 1, "a": [1.5, 2.25], "c": {"z": True, "y": None}}
    p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
    write_json(p1, doc)
    write_json(p2, {"c": {"y": None, "z": True}, "a": [1.5, 2.25], "b": 1})
    assert p1.read_bytes() == p2.read_bytes()
    assert read_json(p1) == doc
