"""WAV container round-trips and malformed-input handling."""

import io
import struct
import wave

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrpnet.errors import AudioDecodeError, UnsupportedAudioError
from ssrpnet.wavfile import read_wav, read_wav_bytes, write_wav, write_wav_bytes


def test_pcm16_round_trip_error_bound(rng):
    x = rng.uniform(-1.0, 1.0, 4096)
    back, rate = read_wav_bytes(write_wav_bytes(x, 22050))
    assert rate == 22050
    assert np.max(np.abs(back - x)) <= 1.0 / 32768.0


def test_float32_round_trip_is_exact_at_float32():
    x = np.linspace(-1.0, 1.0, 777)
    back, rate = read_wav_bytes(write_wav_bytes(x, 8000, encoding="float32"))
    npt.assert_array_equal(back, x.astype(np.float32).astype(np.float64))


def test_pcm16_full_scale_endpoints():
    x = np.array([-1.0, 1.0, 0.0])
    back, _ = read_wav_bytes(write_wav_bytes(x, 44100))
    assert back[0] == -1.0          # -32768 / 32768
    assert back[1] == 32767 / 32768  # +1.0 clips to the max code
    assert back[2] == 0.0


def test_matches_stdlib_wave_reader(tmp_path, rng):
    x = rng.uniform(-1.0, 1.0, 1000)
    path = tmp_path / "clip.wav"
    write_wav(path, x, 16000)
    with wave.open(str(path)) as wf:
        assert wf.getframerate() == 16000
        assert wf.getnchannels() == 1
        assert wf.getsampwidth() == 2
        raw = np.frombuffer(wf.readframes(wf.getnframes()), dtype="<i2")
    ours, _ = read_wav(path)
    npt.assert_array_equal(ours, raw.astype(np.float64) / 32768.0)


def test_stereo_decodes_to_two_columns(rng):
    x = rng.uniform(-1.0, 1.0, (256, 2))
    back, _ = read_wav_bytes(write_wav_bytes(x, 44100))
    assert back.shape == (256, 2)
    assert np.max(np.abs(back - x)) <= 1.0 / 32768.0


def test_extra_chunks_are_skipped(rng):
    x = rng.uniform(-1.0, 1.0, 64)
    data = bytearray(write_wav_bytes(x, 44100))
    # splice a LIST chunk with an odd payload length between fmt and data
    insert_at = data.index(b"data")
    extra = b"LIST" + struct.pack("<I", 5) + b"INFOx" + b"\x00"  # pad byte
    data[insert_at:insert_at] = extra
    data[4:8] = struct.pack("<I", len(data) - 8)
    back, rate = read_wav_bytes(bytes(data))
    assert rate == 44100
    assert back.shape == (64,)


def test_truncated_file_raises():
    x = np.zeros(100)
    data = write_wav_bytes(x, 44100)
    with pytest.raises(AudioDecodeError):
        read_wav_bytes(data[: len(data) - 50])


def test_not_riff_raises():
    with pytest.raises(AudioDecodeError):
        read_wav_bytes(b"OggS" + b"\x00" * 100)


def test_missing_fmt_raises():
    buf = b"RIFF" + struct.pack("<I", 12) + b"WAVE" + b"data" + struct.pack("<I", 0)
    with pytest.raises(AudioDecodeError):
        read_wav_bytes(buf)


def _wav_with_format_tag(tag: int) -> bytes:
    fmt = struct.pack("<HHIIHH", tag, 1, 44100, 88200, 2, 16)
    payload = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
               + b"data" + struct.pack("<I", 4) + b"\x00" * 4)
    return b"RIFF" + struct.pack("<I", len(payload)) + payload


def test_unsupported_codec_raises_specific_error():
    with pytest.raises(UnsupportedAudioError):
        read_wav_bytes(_wav_with_format_tag(0xFFFE))  # WAVE_FORMAT_EXTENSIBLE
    with pytest.raises(UnsupportedAudioError):
        read_wav_bytes(_wav_with_format_tag(7))  # mu-law


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
                min_size=1, max_size=500),
       st.sampled_from([8000, 16000, 44100]))
def test_round_trip_property(samples, rate):
    x = np.array(samples)
    back, back_rate = read_wav_bytes(write_wav_bytes(x, rate))
    assert back_rate == rate
    assert back.shape == x.shape
    assert np.max(np.abs(back - x)) <= 1.0 / 32768.0
