import struct

import numpy as np
import pytest
from scipy.io import wavfile

from sstd.errors import ClipTooShort, TooFewFrames, UnsupportedFormat
from sstd.features import (
    AudioClip,
    FeatureConfig,
    FeatureMatrix,
    cmvn,
    load_audio,
    mfcc,
    read_features,
    write_features,
)


def write_wav(path, data, rate=16000):
    wavfile.write(path, rate, data)
    return path


def test_load_zero_signal(tmp_path):
    path = write_wav(tmp_path / "z.wav", np.zeros(400, dtype=np.int16))
    clip = load_audio(path)
    assert clip.sample_rate == 16000
    assert len(clip.samples) == 400
    assert np.all(clip.samples == 0.0)
    assert clip.id == "z"


def test_load_stereo_averages_to_mono(tmp_path):
    stereo = np.stack([np.full(200, 0.5, dtype=np.float32),
                       np.full(200, -0.5, dtype=np.float32)], axis=1)
    clip = load_audio(write_wav(tmp_path / "s.wav", stereo))
    assert clip.samples.shape == (200,)
    assert np.all(clip.samples == 0.0)


def test_pcm_scaling_convention(tmp_path):
    data = np.array([-32768, 0, 32767], dtype=np.int16)
    clip = load_audio(write_wav(tmp_path / "p.wav", data))
    assert clip.samples[0] == -1.0
    assert clip.samples[1] == 0.0
    assert clip.samples[2] == 32767 / 32768


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_audio(tmp_path / "nope.wav")


def test_load_rejects_non_pcm_codec(tmp_path):
    # Handcrafted RIFF with format code 7 (mu-law).
    body = struct.pack("<4sI4s", b"RIFF", 36 + 4, b"WAVE")
    fmt = struct.pack("<4sIHHIIHH", b"fmt ", 16, 7, 1, 8000, 8000, 1, 8)
    data = struct.pack("<4sI", b"data", 4) + b"\x00" * 4
    path = tmp_path / "mulaw.wav"
    path.write_bytes(body + fmt + data)
    with pytest.raises(UnsupportedFormat):
        load_audio(path)


def test_load_rejects_empty_data_chunk(tmp_path):
    path = write_wav(tmp_path / "e.wav", np.zeros(0, dtype=np.int16))
    with pytest.raises(UnsupportedFormat):
        load_audio(path)


def tone(n, rate=16000, hz=440.0):
    t = np.arange(n) / rate
    return AudioClip(0.3 * np.sin(2 * np.pi * hz * t), rate, id="tone")


def test_frame_count_single_window():
    feats = mfcc(tone(400))
    assert feats.n_frames == 1
    assert feats.dim == 13
    assert feats.frame_shift_s == pytest.approx(0.010)
    assert feats.frame_length_s == pytest.approx(0.025)


def test_frame_count_one_second():
    feats = mfcc(tone(16000))
    assert feats.n_frames == 98  # 1 + (16000-400)//160


@pytest.mark.parametrize("n", [400, 401, 559, 560, 561, 4000, 16001])
def test_frame_count_formula(n):
    feats = mfcc(tone(n))
    assert feats.n_frames == 1 + (n - 400) // 160


@pytest.mark.parametrize("window_ms,hop_ms", [(20.0, 10.0), (25.0, 12.5), (30.0, 5.0)])
@pytest.mark.parametrize("n", [480, 991, 2000])
def test_frame_count_formula_other_configs(window_ms, hop_ms, n):
    config = FeatureConfig(window_s=window_ms / 1000.0, hop_s=hop_ms / 1000.0)
    window = round(window_ms * 16)
    hop = round(hop_ms * 16)
    if n < window:
        with pytest.raises(ClipTooShort):
            mfcc(tone(n), config)
    else:
        assert mfcc(tone(n), config).n_frames == 1 + (n - window) // hop


def test_mfcc_deterministic():
    a = mfcc(tone(8000)).frames
    b = mfcc(tone(8000)).frames
    assert np.array_equal(a, b)


def test_mfcc_too_short():
    with pytest.raises(ClipTooShort):
        mfcc(tone(399))


def test_mfcc_deltas_triple_width():
    base = mfcc(tone(8000))
    with_d = mfcc(tone(8000), FeatureConfig(append_deltas=True))
    assert with_d.dim == 3 * base.dim


def test_cmvn_normalizes_mfcc_output():
    rng = np.random.default_rng(0)
    clip = AudioClip(0.1 * rng.standard_normal(16000), 16000, id="noise")
    normed = cmvn(mfcc(clip))
    assert np.all(np.abs(normed.frames.mean(axis=0)) <= 1e-6)
    assert np.all(np.abs(normed.frames.var(axis=0) - 1.0) <= 1e-4)


def test_cmvn_constant_dimension_floors_to_zero():
    mat = FeatureMatrix(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), 0.01, 0.025)
    out = cmvn(mat)
    assert np.all(out.frames[:, 0] == 0.0)


def test_cmvn_hand_computed_example():
    out = cmvn(FeatureMatrix(np.array([[1.0, 0.0], [3.0, 0.0]]), 0.01, 0.025))
    # mean 2, population std 1 for dim 0; dim 1 constant -> zeros.
    assert np.allclose(out.frames[:, 0], [-1.0, 1.0])
    assert np.all(out.frames[:, 1] == 0.0)


def test_cmvn_idempotent_off_floor():
    rng = np.random.default_rng(1)
    mat = FeatureMatrix(rng.standard_normal((50, 6)), 0.01, 0.025)
    once = cmvn(mat)
    twice = cmvn(once)
    assert np.max(np.abs(twice.frames - once.frames)) <= 1e-6


def test_cmvn_needs_two_frames():
    with pytest.raises(TooFewFrames):
        cmvn(FeatureMatrix(np.ones((1, 4)), 0.01, 0.025))


def test_feature_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    mat = FeatureMatrix(rng.standard_normal((7, 5)), 0.01, 0.025, "utt1")
    path = tmp_path / "utt1.feat"
    write_features(mat, path)
    back = read_features(path)
    assert back.n_frames == 7 and back.dim == 5
    assert back.utterance_id == "utt1"
    assert back.frame_shift_s == pytest.approx(0.01)
    assert np.array_equal(back.frames, mat.frames.astype(np.float32).astype(np.float64))


def test_feature_file_wire_format(tmp_path):
    # Header layout: magic, u32 version, u32 frames, u32 dim, f32 shift,
    # f32 length, then frames x dim little-endian f32, row-major.
    mat = FeatureMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]), 0.01, 0.025, "w")
    path = tmp_path / "w.feat"
    write_features(mat, path)
    raw = path.read_bytes()
    magic, version, frames, dim, shift, length = struct.unpack("<8sIIIff", raw[:28])
    assert magic == b"SSTDFEAT"
    assert (version, frames, dim) == (1, 2, 2)
    assert shift == pytest.approx(0.01) and length == pytest.approx(0.025)
    values = struct.unpack("<4f", raw[28:])
    assert values == (1.0, 2.0, 3.0, 4.0)


def test_feature_file_bad_magic(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(b"NOTAFEAT" + b"\x00" * 20)
    with pytest.raises(UnsupportedFormat):
        read_features(path)


def test_feature_file_truncated(tmp_path):
    rng = np.random.default_rng(3)
    mat = FeatureMatrix(rng.standard_normal((4, 4)), 0.01, 0.025, "t")
    path = tmp_path / "t.feat"
    write_features(mat, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(UnsupportedFormat):
        read_features(path)
