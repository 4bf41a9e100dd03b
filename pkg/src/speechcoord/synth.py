"""Synthetic multichannel signals with controlled coordination complexity.

Three regimes exercise the eigenspectrum machinery without any speech data:
"simple" channels are near-copies of a shared low-frequency oscillator
mixture, "erratic" channels are independent smoothed noise, and "natural"
sits in between. A single noise_ratio knob mixes the shared and independent
components, so the effective rank of the resulting coordination matrices
increases monotonically from simple to erratic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .articulatory_io import ChannelSeries
from .coordination import Eigenspectrum

FRAME_RATE = 100.0
NOISE_SMOOTHING_FRAMES = 4
CHANNEL_LAG_FRAMES = 1.0

KIND_NOISE_RATIOS = {"simple": 0.05, "natural": 0.5, "erratic": 1.0}


class SynthError(Exception):
    pass


class AllZeroSpectrum(SynthError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    channels: int = 6
    frames: int = 500
    seed: int = 0
    base_freqs: tuple[float, ...] = (1.0, 2.3)
    noise_ratio: float | None = None

    def __post_init__(self):
        if self.kind not in KIND_NOISE_RATIOS:
            raise ValueError(f"kind must be one of {sorted(KIND_NOISE_RATIOS)}")
        if self.channels < 2:
            raise ValueError("need at least 2 channels")
        if self.frames <= 73:
            raise ValueError("need more than 73 frames for the default delay layout")
        ratio = self.noise_ratio
        if ratio is None:
            ratio = KIND_NOISE_RATIOS[self.kind]
            object.__setattr__(self, "noise_ratio", ratio)
        if not 0.0 <= ratio <= 1.0:
            raise ValueError("noise_ratio must lie in [0, 1]")


def _unit_std(x: np.ndarray, axis: int = -1) -> np.ndarray:
    std = x.std(axis=axis, keepdims=True)
    std[std == 0.0] = 1.0
    return x / std


def gen_coordinated(spec: SynthSpec) -> ChannelSeries:
    """Generate a K x T series mixing shared oscillators with channel noise.

    Channel k sees the oscillator mixture lagged by k frames (a fixed phase
    offset per channel) plus its own smoothed white noise (moving average
    over 4 frames); the two components are mixed with weights
    (1 - noise_ratio) and noise_ratio after each is scaled to unit std.
    Output is deterministic given the spec's seed (PCG64 generator).
    """
    rng = np.random.default_rng(spec.seed)
    k, t = spec.channels, spec.frames
    times = np.arange(t) / FRAME_RATE

    osc_phases = rng.uniform(0.0, 2.0 * np.pi, size=len(spec.base_freqs))
    amplitudes = 1.0 / (1.0 + np.arange(len(spec.base_freqs)))
    shared = np.zeros((k, t))
    for freq, phase, amp in zip(spec.base_freqs, osc_phases, amplitudes):
        lags = (np.arange(k) * CHANNEL_LAG_FRAMES / FRAME_RATE)[:, None]
        shared += amp * np.sin(2.0 * np.pi * freq * (times[None, :] + lags) + phase)
    shared = _unit_std(shared)

    white = rng.standard_normal((k, t + NOISE_SMOOTHING_FRAMES - 1))
    kernel = np.ones(NOISE_SMOOTHING_FRAMES) / NOISE_SMOOTHING_FRAMES
    noise = np.stack([np.convolve(w, kernel, mode="valid") for w in white])
    noise = _unit_std(noise)

    ratio = float(spec.noise_ratio)
    values = (1.0 - ratio) * shared + ratio * noise
    names = tuple(f"ch{i + 1:02d}" for i in range(k))
    return ChannelSeries(values=values, channel_names=names, frame_rate=FRAME_RATE)


def effective_rank(spectrum: Eigenspectrum, scale_index: int = 0) -> float:
    """Participation ratio (sum l)^2 / sum l^2 of one scale's eigenvalues.

    Eigenvalues are clamped below at zero first; small negative values from
    truncated-sum correlation matrices would otherwise inflate the ratio.
    """
    vals = np.maximum(spectrum.per_scale[scale_index], 0.0)
    sq = float(np.sum(vals**2))
    if sq == 0.0:
        raise AllZeroSpectrum(f"scale index {scale_index} has no positive eigenvalues")
    return float(np.sum(vals)) ** 2 / sq
