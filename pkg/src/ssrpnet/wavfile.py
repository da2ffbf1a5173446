"""Minimal RIFF/WAVE reader and writer.

Supports the two encodings found in the target datasets: 16-bit PCM and
32-bit IEEE float, mono or multi-channel. Reading returns float samples in
[-1, 1]; multi-channel data is averaged down to mono by the caller-facing
:func:`ssrpnet.features.load_wav`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import AudioDecodeError, UnsupportedAudioError

PCM = 1
IEEE_FLOAT = 3
EXTENSIBLE = 0xFFFE


def read_wav_bytes(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a WAV byte string.

    Returns ``(samples, sample_rate)`` where samples has shape ``(n,)`` for
    mono or ``(n, channels)`` otherwise, dtype float64, values in [-1, 1].
    """
    if len(data) < 12:
        raise AudioDecodeError("file too short to hold a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioDecodeError("not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise AudioDecodeError("fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise AudioDecodeError("data chunk truncated")
            payload = body
        # chunks are word-aligned
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise AudioDecodeError("missing fmt chunk")
    if payload is None:
        raise AudioDecodeError("missing data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format == EXTENSIBLE:
        # WAVE_FORMAT_EXTENSIBLE: the real format tag leads the subformat GUID
        raise UnsupportedAudioError("extensible WAV format not supported")
    if channels < 1:
        raise AudioDecodeError("channel count must be >= 1")
    if sample_rate <= 0:
        raise AudioDecodeError("sample rate must be positive")

    if audio_format == PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedAudioError(
            f"unsupported codec: format tag {audio_format}, {bits}-bit"
        )

    if channels > 1:
        frames = samples.size // channels
        samples = samples[: frames * channels].reshape(frames, channels)
    if samples.size == 0:
        raise AudioDecodeError("data chunk holds no samples")
    return samples, int(sample_rate)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    return read_wav_bytes(Path(path).read_bytes())


def write_wav_bytes(samples: np.ndarray, sample_rate: int, encoding: str = "pcm16") -> bytes:
    """Encode samples (shape ``(n,)`` or ``(n, channels)``, values in [-1, 1])."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n_frames, channels = samples.shape

    if encoding == "pcm16":
        # scale by 32768 and clamp the single overflowing code so the
        # read-back error stays within 1/32768
        ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
        audio_format, bits = PCM, 16
    elif encoding == "float32":
        payload = samples.astype("<f4").tobytes()
        audio_format, bits = IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block_align = channels * bits // 8
    fmt_body = struct.pack(
        "<HHIIHH", audio_format, channels, sample_rate,
        sample_rate * block_align, block_align, bits,
    )
    chunks = b"WAVE"
    chunks += b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", len(chunks)) + chunks


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int,
              encoding: str = "pcm16") -> None:
    Path(path).write_bytes(write_wav_bytes(samples, sample_rate, encoding))
