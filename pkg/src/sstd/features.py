"""Audio decoding, MFCC extraction, CMVN, and the binary feature-file format.

MFCCs follow the field-standard recipe: pre-emphasis, windowed framing (no
padding, so a clip shorter than one window is an error), magnitude spectrum,
triangular mel filterbank, log, DCT-II. Cepstral mean and variance
normalization is per utterance with the population standard deviation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.fftpack import dct
from scipy.io import wavfile

from .errors import ClipTooShort, DimensionMismatch, TooFewFrames, UnsupportedFormat

FEATURE_MAGIC = b"SSTDFEAT"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<8sIIIff")

# Dimensions whose population std falls below this are divided by the floor
# instead, which zeroes constant dimensions.
CMVN_STD_FLOOR = 1e-10


@dataclass
class AudioClip:
    samples: np.ndarray  # mono, float64, in [-1, 1]
    sample_rate: int
    id: str = ""
    speaker: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise UnsupportedFormat(f"sample rate {self.sample_rate} is not positive")
        self.samples = np.asarray(self.samples, dtype=np.float64)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FeatureMatrix:
    frames: np.ndarray  # (n_frames, dim)
    frame_shift_s: float
    frame_length_s: float
    utterance_id: str = ""

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def frame_to_time(self, index: int) -> float:
        return index * self.frame_shift_s


@dataclass(frozen=True)
class FeatureConfig:
    """MFCC settings. Defaults are the common 25 ms / 10 ms / 13-coefficient setup."""

    window_s: float = 0.025
    hop_s: float = 0.010
    preemphasis: float = 0.97
    n_mels: int = 26
    n_ceps: int = 13
    n_fft: Optional[int] = None  # next power of two >= window when unset
    low_hz: float = 0.0
    high_hz: Optional[float] = None  # Nyquist when unset
    log_floor: float = 1e-10
    append_deltas: bool = False
    delta_width: int = 2


def load_audio(path: str | Path, clip_id: str = "", speaker: str = "") -> AudioClip:
    """Read a RIFF/WAVE PCM file (16-bit int or 32-bit float; also 8/32-bit
    int and 64-bit float) as normalized mono samples in [-1, 1].

    Multichannel audio is averaged to mono. 16-bit samples are divided by
    32768, so -32768 maps to exactly -1.0.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    if data.size == 0:
        raise UnsupportedFormat(f"{path}: zero-length data chunk")
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        samples = data / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: unsupported sample dtype {data.dtype}")
    if samples.ndim > 1:
        samples = samples.mean(axis=1)
    return AudioClip(samples=samples, sample_rate=int(rate), id=clip_id or path.stem, speaker=speaker)


def _frame_signal(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    n = len(samples)
    if n < window:
        raise ClipTooShort(f"{n} samples < window of {window}")
    count = 1 + (n - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(count)[:, None]
    return samples[idx]


def _mel_filterbank(n_mels: int, n_fft: int, rate: int, low_hz: float, high_hz: float) -> np.ndarray:
    def to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    mel_points = np.linspace(to_mel(low_hz), to_mel(high_hz), n_mels + 2)
    bins = np.floor((n_fft + 1) * to_hz(mel_points) / rate).astype(int)
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        left, center, right = bins[m], bins[m + 1], bins[m + 2]
        for k in range(left, center):
            bank[m, k] = (k - left) / max(center - left, 1)
        for k in range(center, right):
            bank[m, k] = (right - k) / max(right - center, 1)
    return bank


def mfcc(clip: AudioClip, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Mel-frequency cepstral coefficients of one clip.

    Frame count is 1 + floor((num_samples - window) / hop); a clip shorter
    than one window raises ClipTooShort.
    """
    rate = clip.sample_rate
    window = int(round(config.window_s * rate))
    hop = int(round(config.hop_s * rate))
    samples = clip.samples
    if len(samples) < window:
        raise ClipTooShort(
            f"{clip.id or 'clip'}: {len(samples)} samples < one {window}-sample window"
        )

    emphasized = np.concatenate(([samples[0]], samples[1:] - config.preemphasis * samples[:-1]))
    frames = _frame_signal(emphasized, window, hop) * np.hamming(window)

    n_fft = config.n_fft
    if n_fft is None:
        n_fft = 1
        while n_fft < window:
            n_fft *= 2
    spectrum = np.abs(np.fft.rfft(frames, n_fft))

    high_hz = config.high_hz if config.high_hz is not None else rate / 2.0
    bank = _mel_filterbank(config.n_mels, n_fft, rate, config.low_hz, high_hz)
    energies = np.maximum(spectrum @ bank.T, config.log_floor)
    cepstra = dct(np.log(energies), type=2, axis=1, norm="ortho")[:, : config.n_ceps]

    if config.append_deltas:
        deltas = _delta(cepstra, config.delta_width)
        cepstra = np.hstack([cepstra, deltas, _delta(deltas, config.delta_width)])

    return FeatureMatrix(
        frames=cepstra,
        frame_shift_s=hop / rate,
        frame_length_s=window / rate,
        utterance_id=clip.id,
    )


def _delta(feat: np.ndarray, width: int) -> np.ndarray:
    denom = 2.0 * sum(n * n for n in range(1, width + 1))
    padded = np.pad(feat, ((width, width), (0, 0)), mode="edge")
    out = np.zeros_like(feat)
    for n in range(1, width + 1):
        out += n * (padded[width + n : width + n + len(feat)] - padded[width - n : width - n + len(feat)])
    return out / denom


def cmvn(features: FeatureMatrix) -> FeatureMatrix:
    """Per-utterance mean/variance normalization of each coefficient dimension."""
    if features.n_frames < 2:
        raise TooFewFrames(f"cmvn needs >= 2 frames, got {features.n_frames}")
    mean = features.frames.mean(axis=0)
    std = features.frames.std(axis=0)  # population convention
    std = np.where(std < CMVN_STD_FLOOR, CMVN_STD_FLOOR, std)
    return replace(features, frames=(features.frames - mean) / std)


def write_features(features: FeatureMatrix, path: str | Path) -> None:
    """Write the little-endian binary feature format (magic SSTDFEAT, v1)."""
    data = np.ascontiguousarray(features.frames, dtype="<f4")
    header = _HEADER.pack(
        FEATURE_MAGIC,
        FEATURE_VERSION,
        features.n_frames,
        features.dim,
        features.frame_shift_s,
        features.frame_length_s,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_features(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise UnsupportedFormat(f"{path}: truncated header")
        magic, version, n_frames, dim, shift, length = _HEADER.unpack(raw)
        if magic != FEATURE_MAGIC:
            raise UnsupportedFormat(f"{path}: bad magic {magic!r}")
        if version != FEATURE_VERSION:
            raise UnsupportedFormat(f"{path}: unsupported version {version}")
        body = fh.read(4 * n_frames * dim)
        if len(body) < 4 * n_frames * dim:
            raise UnsupportedFormat(f"{path}: truncated data ({len(body)} bytes)")
        frames = np.frombuffer(body, dtype="<f4").reshape(n_frames, dim)
    return FeatureMatrix(
        frames=frames.astype(np.float64),
        frame_shift_s=float(shift),
        frame_length_s=float(length),
        utterance_id=path.stem,
    )


def check_same_dim(a: FeatureMatrix, b: FeatureMatrix) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
