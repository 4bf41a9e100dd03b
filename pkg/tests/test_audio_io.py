import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechcoord.audio_io import (
    AudioBuffer,
    CorruptHeader,
    InvalidRate,
    UnsupportedEncoding,
    load_wav,
    resample,
    write_wav,
)
from conftest import tone


def pcm16_wav_bytes(frames: np.ndarray, sample_rate: int = 16000) -> bytes:
    """Hand-rolled PCM16 WAV; frames is (n, channels) int16."""
    channels = frames.shape[1]
    payload = frames.astype("<i2").tobytes()
    return struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, channels, sample_rate,
        sample_rate * 2 * channels, 2 * channels, 16,
        b"data", len(payload),
    ) + payload


def test_stereo_opposite_channels_average_to_zero(tmp_path):
    frames = np.tile(np.array([[16384, -16384]], dtype=np.int16), (100, 1))
    path = tmp_path / "stereo.wav"
    path.write_bytes(pcm16_wav_bytes(frames))
    buf = load_wav(path)
    assert buf.sample_rate == 16000
    np.testing.assert_allclose(buf.samples, 0.0)


def test_pcm16_full_scale_value(tmp_path):
    frames = np.zeros((10, 1), dtype=np.int16)
    frames[3, 0] = 32767
    path = tmp_path / "fs.wav"
    path.write_bytes(pcm16_wav_bytes(frames))
    buf = load_wav(path)
    assert buf.samples[3] == pytest.approx(32767 / 32768, abs=1e-12)


def test_tone_roundtrip_fft_peak(tmp_path):
    # oracle: discrete Fourier magnitude peak of the reloaded signal
    path = tmp_path / "tone.wav"
    write_wav(path, tone(440.0, 1.0), encoding="pcm16")
    buf = load_wav(path)
    spectrum = np.abs(np.fft.rfft(buf.samples))
    freqs = np.fft.rfftfreq(buf.samples.size, 1.0 / buf.sample_rate)
    assert freqs[spectrum.argmax()] == pytest.approx(440.0, abs=0.5)


def test_float32_roundtrip_exact(tmp_path):
    buf = tone(100.0, 0.1)
    path = tmp_path / "f32.wav"
    write_wav(path, buf, encoding="float32")
    reloaded = load_wav(path)
    np.testing.assert_allclose(
        reloaded.samples, buf.samples.astype(np.float32), atol=0.0
    )


def test_pcm24_scaling(tmp_path):
    # one full-scale-ish 24-bit sample written by hand
    vals = [0, 1 << 22, -(1 << 23)]
    raw = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in vals)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(raw), b"WAVE",
        b"fmt ", 16, 1, 1, 16000, 16000 * 3, 3, 24,
        b"data", len(raw),
    )
    path = tmp_path / "p24.wav"
    path.write_bytes(header + raw)
    buf = load_wav(path)
    np.testing.assert_allclose(buf.samples, [0.0, 0.5, -1.0], atol=1e-12)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_wav("/nonexistent/never.wav")


def test_unsupported_codec_names_tag(tmp_path):
    payload = b"\x00" * 64
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 7, 1, 16000, 16000, 1, 8,  # mu-law
        b"data", len(payload),
    )
    path = tmp_path / "ulaw.wav"
    path.write_bytes(header + payload)
    with pytest.raises(UnsupportedEncoding, match="mu-law"):
        load_wav(path)


def test_pcm8_rejected(tmp_path):
    payload = b"\x80" * 64
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, 16000, 16000, 1, 8,
        b"data", len(payload),
    )
    path = tmp_path / "p8.wav"
    path.write_bytes(header + payload)
    with pytest.raises(UnsupportedEncoding) as err:
        load_wav(path)
    assert err.value.format_tag == "PCM8"


def test_corrupt_magic_offsets(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"JUNK" + b"\x00" * 20)
    with pytest.raises(CorruptHeader) as err:
        load_wav(path)
    assert err.value.offset == 0

    path.write_bytes(b"RIFF\x00\x00\x00\x00NOPE" + b"\x00" * 20)
    with pytest.raises(CorruptHeader) as err:
        load_wav(path)
    assert err.value.offset == 8


def test_data_before_fmt_is_corrupt(tmp_path):
    blob = struct.pack("<4sI4s4sI", b"RIFF", 12, b"WAVE", b"data", 4) + b"\x00" * 4
    path = tmp_path / "nofmt.wav"
    path.write_bytes(blob)
    with pytest.raises(CorruptHeader) as err:
        load_wav(path)
    assert err.value.offset == 12


def test_skips_list_chunk(tmp_path):
    frames = (np.ones((50, 1)) * 1000).astype(np.int16)
    base = pcm16_wav_bytes(frames)
    # splice a LIST chunk between fmt and data
    head, data = base[:36], base[36:]
    listed = head + struct.pack("<4sI", b"LIST", 4) + b"INFO" + data
    path = tmp_path / "listed.wav"
    path.write_bytes(listed)
    buf = load_wav(path)
    assert buf.samples.size == 50


def test_resample_length_ratio():
    buf = tone(300.0, 1.0, sample_rate=44100)
    assert buf.samples.size == 44100
    out = resample(buf, 16000)
    assert out.samples.size == 16000
    assert out.sample_rate == 16000


def test_resample_identity_bit_exact(rng):
    buf = AudioBuffer(rng.standard_normal(5000) * 0.1, 16000)
    out = resample(buf, 16000)
    assert np.array_equal(out.samples, buf.samples)


def test_resample_tone_spectrum():
    # oracle: spectral analysis of the resampled output
    buf = tone(300.0, 1.0, sample_rate=44100)
    out = resample(buf, 16000)
    spectrum = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(out.samples.size, 1.0 / 16000)
    peak = freqs[spectrum.argmax()]
    assert abs(peak - 300.0) <= 1.0
    # everything far from the tone must sit >60 dB below the peak
    far = freqs > 1000.0
    rejection_db = 10.0 * np.log10(np.max(spectrum[far] ** 2) / np.max(spectrum) ** 2)
    assert rejection_db < -60.0


def test_resample_preserves_tone_energy():
    buf = tone(300.0, 1.0, sample_rate=44100)
    out = resample(buf, 16000)
    # skip filter-edge samples at both ends
    inner_in = buf.samples[441:-441]
    inner_out = out.samples[160:-160]
    ratio = np.mean(inner_out**2) / np.mean(inner_in**2)
    assert abs(ratio - 1.0) < 0.01


def test_resample_upsample_preserves_tone():
    buf = tone(300.0, 1.0, sample_rate=16000)
    out = resample(buf, 44100)
    assert out.samples.size == 44100
    spectrum = np.abs(np.fft.rfft(out.samples[441:-441]))
    freqs = np.fft.rfftfreq(out.samples.size - 882, 1.0 / 44100)
    assert abs(freqs[spectrum.argmax()] - 300.0) <= 1.0


def test_mono_commutes_with_resample(rng):
    left = rng.standard_normal(22050) * 0.2
    right = rng.standard_normal(22050) * 0.2
    mono_first = resample(AudioBuffer((left + right) / 2.0, 22050), 16000)
    l_res = resample(AudioBuffer(left, 22050), 16000)
    r_res = resample(AudioBuffer(right, 22050), 16000)
    np.testing.assert_allclose(
        mono_first.samples, (l_res.samples + r_res.samples) / 2.0, atol=1e-6
    )


def test_invalid_target_rate():
    with pytest.raises(InvalidRate):
        resample(tone(100.0, 0.1), 4000)


def test_audio_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([]), 16000)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(10), 4000)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(10), 400000)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=8000, max_value=48000))
def test_identity_resample_any_rate(rate):
    x = np.linspace(-0.5, 0.5, 1000)
    out = resample(AudioBuffer(x, rate), rate)
    assert np.array_equal(out.samples, x)
