"""Audio decoding and fixed-shape normalized log-mel spectrograms.

The pipeline is: decode WAV -> force a fixed duration -> windowed FFT power
spectrogram -> mel filterbank -> dB with a floor -> pad/truncate the time
axis and z-score per clip. Defaults (1024-point Hann window, hop 512,
centered frames) turn a 5 s clip at 44.1 kHz into 431 frames of 40 mel bins.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import wavfile
from .errors import InsufficientAudioError, ShapeError

LMSP_MAGIC = b"LMSP"


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ShapeError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FeatureConfig:
    """STFT + mel parameters for :func:`log_mel`."""

    sample_rate: int = 44100
    n_fft: int = 1024
    win_length: int = 1024
    hop_length: int = 512
    n_mels: int = 40
    f_min: float = 0.0
    f_max: float = 22050.0
    power_floor: float = 1e-10  # dB floor = 10*log10(power_floor) = -100 dB
    clip_seconds: float = 5.0
    target_frames: int = 431  # PCA experiments use 428; see RunConfig

    @property
    def db_floor(self) -> float:
        return 10.0 * np.log10(self.power_floor)

    def digest_fields(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "n_fft": self.n_fft,
            "win_length": self.win_length,
            "hop_length": self.hop_length,
            "n_mels": self.n_mels,
            "f_min": self.f_min,
            "f_max": self.f_max,
            "power_floor": self.power_floor,
            "clip_seconds": self.clip_seconds,
            "target_frames": self.target_frames,
        }


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters: ``weights`` maps FFT bins to mel bins."""

    n_mels: int
    weights: np.ndarray  # (n_mels, n_bins), non-negative
    f_min: float
    f_max: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != self.n_mels:
            raise ShapeError("weights must be (n_mels, n_bins)")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("filter weights must be finite and non-negative")
        if np.any(w.sum(axis=1) == 0):
            raise ValueError("every mel filter needs at least one nonzero weight")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class LogMelSpectrogram:
    """T x F matrix; dB-scaled after :func:`log_mel`, z-scored after shaping."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError("values must be a T x F matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrogram entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> MelFilterbank:
    """Triangular filters with peaks equally spaced on the HTK mel scale."""
    n_bins = cfg.n_fft // 2 + 1
    fft_freqs = np.arange(n_bins) * (cfg.sample_rate / cfg.n_fft)
    mel_pts = np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    weights = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        lo, mid, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (fft_freqs - lo) / (mid - lo)
        down = (hi - fft_freqs) / (hi - mid)
        weights[i] = np.maximum(0.0, np.minimum(up, down))
    return MelFilterbank(cfg.n_mels, weights, cfg.f_min, cfg.f_max)


def load_wav_bytes(data: bytes) -> AudioClip:
    """Decode a PCM16 or float32 WAV byte string; channels average to mono."""
    samples, rate = wavfile.read_wav_bytes(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(samples, rate)


def load_wav(path: str | Path) -> AudioClip:
    return load_wav_bytes(Path(path).read_bytes())


def fix_duration(clip: AudioClip, seconds: float) -> AudioClip:
    """Truncate or zero-pad at the end so the clip lasts exactly ``seconds``."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    target = int(round(seconds * clip.sample_rate))
    samples = clip.samples
    if samples.size >= target:
        samples = samples[:target]
    else:
        samples = np.concatenate([samples, np.zeros(target - samples.size)])
    return AudioClip(samples, clip.sample_rate)


def _periodic_hann(n: int) -> np.ndarray:
    return np.hanning(n + 1)[:-1]


def _stft_power(samples: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Centered magnitude-squared STFT, frames on rows."""
    pad = cfg.n_fft // 2
    padded = np.pad(samples, pad, mode="reflect")
    n_frames = 1 + (padded.size - cfg.n_fft) // cfg.hop_length
    idx = np.arange(cfg.n_fft)[None, :] + cfg.hop_length * np.arange(n_frames)[:, None]
    frames = padded[idx] * _periodic_hann(cfg.win_length)
    spectrum = np.fft.rfft(frames, n=cfg.n_fft, axis=1)
    return np.abs(spectrum) ** 2


def log_mel(clip: AudioClip, cfg: FeatureConfig | None = None,
            filterbank: MelFilterbank | None = None) -> LogMelSpectrogram:
    """dB-scaled mel power spectrogram, shape (n_frames, n_mels)."""
    cfg = cfg or FeatureConfig()
    if clip.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"clip is {clip.sample_rate} Hz but the pipeline expects "
            f"{cfg.sample_rate} Hz; resampling is not supported"
        )
    if clip.samples.size < cfg.win_length:
        raise InsufficientAudioError(
            f"clip has {clip.samples.size} samples, below one {cfg.win_length}-sample window"
        )
    fb = filterbank or mel_filterbank(cfg)
    power = _stft_power(clip.samples, cfg)
    mel_power = power @ fb.weights.T
    db = 10.0 * np.log10(np.maximum(mel_power, cfg.power_floor))
    return LogMelSpectrogram(db)


def shape_to_input(spec: LogMelSpectrogram, target_frames: int,
                   pad_value: float | None = None) -> LogMelSpectrogram:
    """Pad/truncate the time axis to ``target_frames``, then z-score per clip.

    Padding rows take ``pad_value`` (default: the -100 dB floor). A constant
    spectrogram normalizes to all zeros instead of dividing by ~0.
    """
    if target_frames <= 0:
        raise ValueError("target_frames must be positive")
    if pad_value is None:
        pad_value = FeatureConfig().db_floor
    values = spec.values
    t = values.shape[0]
    if t >= target_frames:
        values = values[:target_frames]
    else:
        pad = np.full((target_frames - t, values.shape[1]), pad_value)
        values = np.concatenate([values, pad], axis=0)
    mean = values.mean()
    std = values.std()
    if std < 1e-8:
        return LogMelSpectrogram(np.zeros_like(values))
    return LogMelSpectrogram((values - mean) / std)


def extract(clip: AudioClip, cfg: FeatureConfig | None = None,
            filterbank: MelFilterbank | None = None) -> LogMelSpectrogram:
    """Full path: fix duration, log-mel, shape to the configured frame count."""
    cfg = cfg or FeatureConfig()
    clip = fix_duration(clip, cfg.clip_seconds)
    spec = log_mel(clip, cfg, filterbank)
    return shape_to_input(spec, cfg.target_frames, cfg.db_floor)


def with_target_frames(cfg: FeatureConfig, target_frames: int) -> FeatureConfig:
    return replace(cfg, target_frames=target_frames)


# --- serialization ---

def save_lmsp(path: str | Path, spec: LogMelSpectrogram) -> None:
    """Flat binary: magic, u32 T, u32 F, float32 row-major values."""
    t, f = spec.values.shape
    with open(path, "wb") as fh:
        fh.write(LMSP_MAGIC)
        fh.write(struct.pack("<II", t, f))
        fh.write(spec.values.astype("<f4").tobytes())


def load_lmsp(path: str | Path) -> LogMelSpectrogram:
    data = Path(path).read_bytes()
    if data[:4] != LMSP_MAGIC:
        raise ValueError(f"{path}: not an LMSP file")
    t, f = struct.unpack_from("<II", data, 4)
    values = np.frombuffer(data, dtype="<f4", count=t * f, offset=12)
    return LogMelSpectrogram(values.reshape(t, f).astype(np.float64))


def save_csv(path: str | Path, spec: LogMelSpectrogram) -> None:
    """One frame per row, full-precision floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in spec.values:
            writer.writerow([repr(float(v)) for v in row])
