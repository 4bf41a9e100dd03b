"""WAV loading, mono mixdown, and band-limited resampling.

Everything downstream works on a mono float64 waveform, so this module owns
the conversion from RIFF/WAVE files (PCM16/24/32 and float32) into an
:class:`AudioBuffer` and the sample-rate conversion to the 16 kHz analysis
rate. Integer PCM is scaled to [-1, 1] by the encoding's full-scale value;
multi-channel audio is averaged down to mono.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MIN_SAMPLE_RATE = 8000
MAX_SAMPLE_RATE = 192000

RESAMPLE_TAPS = 64
RESAMPLE_KAISER_BETA = 8.6


class AudioIOError(Exception):
    """Base class for WAV/resampling failures."""


class UnsupportedEncoding(AudioIOError):
    """WAV encoding outside PCM16/24/32 and float32."""

    def __init__(self, format_tag: int | str, detail: str = ""):
        self.format_tag = format_tag
        super().__init__(detail or f"unsupported WAV encoding: {format_tag}")


class CorruptHeader(AudioIOError):
    """Structurally broken RIFF/WAVE header; `offset` is the first bad byte."""

    def __init__(self, offset: int, detail: str):
        self.offset = offset
        super().__init__(f"corrupt WAV header at byte {offset}: {detail}")


class InvalidRate(AudioIOError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform: float64 samples plus sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("AudioBuffer needs a non-empty 1-D sample array")
        if not MIN_SAMPLE_RATE <= int(self.sample_rate) <= MAX_SAMPLE_RATE:
            raise ValueError(
                f"sample_rate {self.sample_rate} outside "
                f"[{MIN_SAMPLE_RATE}, {MAX_SAMPLE_RATE}]"
            )
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# fmt tags we refuse outright, by name so the error is actionable
_KNOWN_CODEC_NAMES = {
    0x0002: "ADPCM",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA ADPCM",
    0x0031: "GSM 6.10",
    0x0055: "MPEG Layer 3",
    0x2000: "AC-3",
}


def _decode_pcm(raw: bytes, bits: int, fmt_offset: int) -> np.ndarray:
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 32:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        vals = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        return vals.astype(np.float64) / 8388608.0
    raise UnsupportedEncoding(f"PCM{bits}", f"PCM with {bits} bits per sample")


def load_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file into a mono AudioBuffer.

    Accepts PCM16, PCM24, PCM32, and float32 data (plain or WAVE_FORMAT_EXTENSIBLE),
    skips auxiliary chunks (LIST, INFO, fact, ...), and averages multi-channel
    audio to mono.

    Raises FileNotFoundError, UnsupportedEncoding (naming the codec tag), or
    CorruptHeader (with the byte offset of the first inconsistency).
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < 12:
        raise CorruptHeader(0, "file shorter than a RIFF header")
    if data[0:4] != b"RIFF":
        raise CorruptHeader(0, f"expected 'RIFF', found {data[0:4]!r}")
    if data[8:12] != b"WAVE":
        raise CorruptHeader(8, f"expected 'WAVE', found {data[8:12]!r}")

    fmt: dict | None = None
    payload: bytes | None = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + chunk_size > len(data):
            # a truncated final data chunk is tolerated; anything else is corrupt
            if chunk_id == b"data":
                chunk_size = len(data) - body_start
            else:
                raise CorruptHeader(pos, f"chunk {chunk_id!r} overruns the file")
        body = data[body_start : body_start + chunk_size]

        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise CorruptHeader(pos, f"fmt chunk too small ({chunk_size} bytes)")
            tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack_from(
                "<HHIIHH", body, 0
            )
            if tag == _WAVE_FORMAT_EXTENSIBLE:
                if chunk_size < 40:
                    raise CorruptHeader(pos, "extensible fmt chunk missing subformat")
                (tag,) = struct.unpack_from("<H", body, 24)
            fmt = {
                "tag": tag,
                "channels": channels,
                "rate": rate,
                "bits": bits,
                "offset": pos,
            }
        elif chunk_id == b"data":
            if fmt is None:
                raise CorruptHeader(pos, "data chunk appears before fmt chunk")
            payload = body
            break
        # other chunks (LIST, INFO, fact, cue, ...) are skipped
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise CorruptHeader(12, "no fmt chunk found")
    if payload is None:
        raise CorruptHeader(len(data), "no data chunk found")

    tag, channels, rate, bits = fmt["tag"], fmt["channels"], fmt["rate"], fmt["bits"]
    if channels < 1:
        raise CorruptHeader(fmt["offset"], "fmt declares zero channels")
    if not MIN_SAMPLE_RATE <= rate <= MAX_SAMPLE_RATE:
        raise CorruptHeader(fmt["offset"], f"implausible sample rate {rate}")

    if tag == _WAVE_FORMAT_PCM:
        if bits not in (16, 24, 32):
            raise UnsupportedEncoding(
                f"PCM{bits}", f"PCM with {bits} bits per sample is not supported"
            )
        bytes_per_sample = bits // 8
        n_frames = len(payload) // (bytes_per_sample * channels)
        if n_frames == 0:
            raise CorruptHeader(fmt["offset"], "data chunk holds no complete frame")
        payload = payload[: n_frames * bytes_per_sample * channels]
        samples = _decode_pcm(payload, bits, fmt["offset"])
    elif tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(
                f"float{bits}", f"IEEE float with {bits} bits is not supported"
            )
        n_frames = len(payload) // (4 * channels)
        if n_frames == 0:
            raise CorruptHeader(fmt["offset"], "data chunk holds no complete frame")
        payload = payload[: n_frames * 4 * channels]
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        name = _KNOWN_CODEC_NAMES.get(tag, f"format tag 0x{tag:04X}")
        raise UnsupportedEncoding(tag, f"compressed/unsupported WAV codec: {name}")

    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return AudioBuffer(samples=samples, sample_rate=rate)


def write_wav(path, buf: AudioBuffer, encoding: str = "pcm16") -> None:
    """Write an AudioBuffer as mono WAV (pcm16 or float32). Mostly for fixtures."""
    x = np.clip(buf.samples, -1.0, 1.0)
    if encoding == "pcm16":
        payload = (np.round(x * 32767.0).astype("<i2")).tobytes()
        tag, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = buf.samples.astype("<f4").tobytes()
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        1,
        buf.sample_rate,
        buf.sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header + payload)


def _kaiser_sinc(u: np.ndarray, cutoff: float, half_width: float, beta: float) -> np.ndarray:
    """Windowed-sinc interpolation kernel evaluated at offsets `u` (in input samples)."""
    x = u / half_width
    inside = np.abs(x) < 1.0
    window = np.zeros_like(u)
    window[inside] = np.i0(beta * np.sqrt(1.0 - x[inside] ** 2)) / np.i0(beta)
    return cutoff * np.sinc(cutoff * u) * window


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited sample-rate conversion via a Kaiser-windowed sinc kernel.

    The anti-alias cutoff sits at min(source, target)/2, the kernel spans 64
    taps at the lower of the two rates (Kaiser window, beta=8.6, >60 dB alias
    rejection), and the output holds round(n * target/source) samples. Equal
    rates return the samples unchanged.
    """
    if target_rate < MIN_SAMPLE_RATE:
        raise InvalidRate(f"target rate {target_rate} below {MIN_SAMPLE_RATE} Hz")
    source_rate = buf.sample_rate
    if target_rate == source_rate:
        return AudioBuffer(samples=buf.samples.copy(), sample_rate=target_rate)

    x = buf.samples
    n_in = x.size
    n_out = int(round(n_in * target_rate / source_rate))
    # cutoff as a fraction of the source Nyquist; <1 only when downsampling
    cutoff = min(1.0, target_rate / source_rate)
    half_width = (RESAMPLE_TAPS / 2.0) / cutoff
    reach = int(np.ceil(half_width)) + 1

    padded = np.concatenate([np.zeros(reach), x, np.zeros(reach + 1)])
    offsets = np.arange(-reach, reach + 1, dtype=np.float64)
    out = np.empty(n_out, dtype=np.float64)
    block = 8192
    for start in range(0, n_out, block):
        stop = min(start + block, n_out)
        m = np.arange(start, stop, dtype=np.float64)
        pos = m * source_rate / target_rate
        base = np.floor(pos)
        u = (pos - base)[:, None] - offsets[None, :]
        taps = _kaiser_sinc(u, cutoff, half_width, RESAMPLE_KAISER_BETA)
        idx = base.astype(np.int64)[:, None] + offsets.astype(np.int64)[None, :] + reach
        out[start:stop] = np.einsum("ij,ij->i", taps, padded[idx])
    return AudioBuffer(samples=out, sample_rate=target_rate)
