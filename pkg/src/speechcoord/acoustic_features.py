"""MFCC and pitch extraction from 16 kHz audio.

Two per-frame feature streams share a 10 ms hop so they stay aligned with
100 frames/s articulatory trajectories:

* 13 mel-frequency cepstral coefficients (c0 included) from a
  Hann -> power spectrum -> 40-filter mel bank -> log -> DCT-II chain;
* a probabilistic-YIN pitch track: per-frame YIN candidates weighted by a
  threshold prior, smoothed by Viterbi decoding over log-spaced pitch states
  with voiced/unvoiced sub-states.

Both framings drop any trailing window that is not followed by a full hop,
so a 3 s buffer at defaults yields 297 frames.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .articulatory_io import ChannelSeries

ANALYSIS_RATE = 16000

# pitch-state discretization and decoding constants
BINS_PER_OCTAVE = 48
BETA_PRIOR_A = 2.0
BETA_PRIOR_B = 18.0
NO_TROUGH_PROB = 0.01
MAX_TRANSITION_OCTAVES_PER_SEC = 35.92


class FeatureError(Exception):
    pass


class TooShort(FeatureError):
    def __init__(self, n_samples: int, needed: int, what: str = "one frame"):
        super().__init__(
            f"buffer of {n_samples} samples is too short for {what} "
            f"({needed} samples needed)"
        )


@dataclass(frozen=True)
class MfccConfig:
    frame_length: int = 400
    hop: int = 160
    fft_size: int = 512
    mel_filters: int = 40
    num_coeffs: int = 13
    mel_fmin: float = 0.0
    mel_fmax: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.num_coeffs > self.mel_filters:
            raise ValueError("num_coeffs cannot exceed mel_filters")
        if self.frame_length > self.fft_size:
            raise ValueError("frame_length cannot exceed fft_size")
        if self.hop < 1:
            raise ValueError("hop must be at least 1")


@dataclass(frozen=True)
class PitchConfig:
    frame_length: int = 1024
    hop: int = 160
    fmin: float = 60.0
    fmax: float = 400.0
    threshold_count: int = 100
    voicing_switch_prob: float = 0.01

    def __post_init__(self):
        if not self.fmin < self.fmax:
            raise ValueError("fmin must be below fmax")
        if self.threshold_count < 2:
            raise ValueError("need at least 2 candidate thresholds")
        if not 0.0 < self.voicing_switch_prob < 1.0:
            raise ValueError("voicing_switch_prob must lie in (0, 1)")


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 in Hz (0 marks unvoiced) with voicing probabilities."""

    f0: np.ndarray
    voiced_prob: np.ndarray
    frame_rate: float

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64)
        prob = np.asarray(self.voiced_prob, dtype=np.float64)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "voiced_prob", prob)
        if f0.shape != prob.shape or f0.ndim != 1:
            raise ValueError("f0 and voiced_prob must be matching 1-D arrays")

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0


def frame_count(n_samples: int, frame_length: int, hop: int) -> int:
    """Frames that fit with a full trailing hop; at least one full frame."""
    if n_samples < frame_length:
        raise TooShort(n_samples, frame_length)
    return max(1, (n_samples - frame_length) // hop)


def _frame_signal(x: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    n = frame_count(x.size, frame_length, hop)
    frames = np.lib.stride_tricks.as_strided(
        x, shape=(n, frame_length), strides=(x.strides[0] * hop, x.strides[0])
    )
    return frames


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_filters: int, fft_size: int, sample_rate: int, fmin: float, fmax: float
) -> np.ndarray:
    """Triangular mel filters on FFT bin frequencies, normalized to unit area."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    lower = (bin_freqs[None, :] - edges[:-2, None]) / (edges[1:-1] - edges[:-2])[:, None]
    upper = (edges[2:, None] - bin_freqs[None, :]) / (edges[2:] - edges[1:-1])[:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


def mfcc(buf, cfg: MfccConfig = MfccConfig()) -> ChannelSeries:
    """13 MFCCs per frame as a ChannelSeries (channels c0..c12, 100 frames/s).

    Pipeline per frame: Hann window, power spectrum (512-point FFT), 40
    triangular mel filters, natural log with a floor, orthonormal DCT-II,
    first `num_coeffs` coefficients kept (c0 included).
    """
    if buf.sample_rate != ANALYSIS_RATE:
        raise ValueError(f"mfcc expects {ANALYSIS_RATE} Hz input, got {buf.sample_rate}")
    frames = _frame_signal(buf.samples, cfg.frame_length, cfg.hop)
    if frames.shape[0] < 2:
        # a single frame cannot form a trajectory series
        raise TooShort(buf.samples.size, cfg.frame_length + 2 * cfg.hop, "two frames")
    n = np.arange(cfg.frame_length)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.frame_length)
    spectrum = scipy.fft.rfft(frames * window, n=cfg.fft_size, axis=1)
    power = np.abs(spectrum) ** 2
    bank = mel_filterbank(
        cfg.mel_filters, cfg.fft_size, buf.sample_rate, cfg.mel_fmin, cfg.mel_fmax
    )
    energies = power @ bank.T
    log_energies = np.log(np.maximum(energies, cfg.log_floor))
    coeffs = scipy.fft.dct(log_energies, type=2, norm="ortho", axis=1)[:, : cfg.num_coeffs]
    names = tuple(f"c{i}" for i in range(cfg.num_coeffs))
    return ChannelSeries(
        values=coeffs.T, channel_names=names, frame_rate=buf.sample_rate / cfg.hop
    )


# ---------------------------------------------------------------------------
# probabilistic YIN
# ---------------------------------------------------------------------------


def _difference_function(frames: np.ndarray, tau_max: int) -> np.ndarray:
    """YIN difference d(tau) for tau in 0..tau_max over half-frame windows."""
    n_frames, frame_length = frames.shape
    w = frame_length // 2
    fft_size = 1 << int(np.ceil(np.log2(frame_length + w)))
    spec_full = scipy.fft.rfft(frames, n=fft_size, axis=1)
    spec_head = scipy.fft.rfft(frames[:, :w], n=fft_size, axis=1)
    corr = scipy.fft.irfft(np.conj(spec_head) * spec_full, n=fft_size, axis=1)[
        :, : tau_max + 1
    ]
    sq = frames**2
    cumsq = np.concatenate(
        [np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1
    )
    # energy of x[tau : tau+w] for each lag
    taus = np.arange(tau_max + 1)
    energy = cumsq[:, taus + w] - cumsq[:, taus]
    diff = energy[:, :1] + energy - 2.0 * corr
    diff[:, 0] = 0.0
    return np.maximum(diff, 0.0)


def _cmndf(diff: np.ndarray) -> np.ndarray:
    """Cumulative-mean-normalized difference; flat 1.0 where there is no energy."""
    tau = np.arange(1, diff.shape[1])
    cum = np.cumsum(diff[:, 1:], axis=1)
    out = np.ones_like(diff)
    np.divide(diff[:, 1:] * tau, cum, out=out[:, 1:], where=cum > 1e-300)
    return out


def _parabolic_refine(curve: np.ndarray, idx: int) -> float:
    if idx <= 0 or idx >= curve.size - 1:
        return float(idx)
    a, b, c = curve[idx - 1], curve[idx], curve[idx + 1]
    denom = a - 2.0 * b + c
    if denom <= 0:
        return float(idx)
    return float(idx) + 0.5 * (a - c) / denom


def _threshold_prior(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Beta(2,18)-shaped prior over thresholds in (0, 1]."""
    thresholds = np.arange(1, count + 1) / count
    density = thresholds ** (BETA_PRIOR_A - 1.0) * (1.0 - thresholds) ** (
        BETA_PRIOR_B - 1.0
    )
    return thresholds, density / density.sum()


def _frame_candidates(cmndf_row, tau_min, tau_max, thresholds, prior, sample_rate, fmin, fmax):
    """YIN candidates for one frame: (freqs, probs) plus total voiced mass.

    Each threshold elects the smallest lag whose local CMNDF minimum dips
    below it; threshold mass with no such trough mostly counts as unvoiced,
    with a small fraction granted to the globally deepest trough.
    """
    seg = cmndf_row[tau_min : tau_max + 1]
    interior = (seg[1:-1] < seg[:-2]) & (seg[1:-1] <= seg[2:])
    trough_idx = np.nonzero(interior)[0] + 1 + tau_min
    if trough_idx.size == 0:
        return np.empty(0), np.empty(0), 0.0
    trough_vals = cmndf_row[trough_idx]

    below = trough_vals[None, :] < thresholds[:, None]
    has_candidate = below.any(axis=1)
    first = np.argmax(below, axis=1)

    probs = np.zeros(trough_idx.size)
    np.add.at(probs, first[has_candidate], prior[has_candidate])
    missing_mass = prior[~has_candidate].sum()
    if missing_mass > 0:
        probs[int(np.argmin(trough_vals))] += NO_TROUGH_PROB * missing_mass

    keep = probs > 0
    lags = np.array(
        [_parabolic_refine(cmndf_row, int(i)) for i in trough_idx[keep]]
    )
    freqs = np.clip(sample_rate / lags, fmin, fmax)
    return freqs, probs[keep], min(float(probs.sum()), 1.0)


def _viterbi_log(log_trans: np.ndarray, log_init: np.ndarray, log_obs: np.ndarray) -> np.ndarray:
    n_frames, n_states = log_obs.shape
    back = np.zeros((n_frames, n_states), dtype=np.int32)
    score = log_init + log_obs[0]
    for t in range(1, n_frames):
        cand = score[:, None] + log_trans
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(n_states)] + log_obs[t]
    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(score))
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _forward_backward_voicing(trans: np.ndarray, init: np.ndarray, obs: np.ndarray, n_bins: int) -> np.ndarray:
    """Posterior probability that each frame is in a voiced sub-state."""
    n_frames = obs.shape[0]
    alpha = np.empty_like(obs)
    scale = np.empty(n_frames)
    a = init * obs[0]
    scale[0] = a.sum() or 1.0
    alpha[0] = a / scale[0]
    for t in range(1, n_frames):
        a = (alpha[t - 1] @ trans) * obs[t]
        scale[t] = a.sum() or 1.0
        alpha[t] = a / scale[t]
    beta = np.empty_like(obs)
    beta[-1] = 1.0
    for t in range(n_frames - 2, -1, -1):
        b = trans @ (beta[t + 1] * obs[t + 1])
        beta[t] = b / scale[t + 1]
    gamma = alpha * beta
    totals = gamma.sum(axis=1)
    totals[totals == 0.0] = 1.0
    return gamma[:, :n_bins].sum(axis=1) / totals


def pyin_pitch(buf, cfg: PitchConfig = PitchConfig()) -> PitchTrack:
    """Probabilistic-YIN pitch track with Viterbi smoothing.

    Per frame, the cumulative-mean-normalized difference function yields
    period candidates; a Beta(2,18) prior over 100 thresholds converts trough
    depths into candidate probabilities. Candidates are decoded over pitch
    states spaced at 48 per octave across [fmin, fmax], each with voiced and
    unvoiced sub-states, and a frame is voiced when its posterior voiced
    probability exceeds 0.5.
    """
    sample_rate = buf.sample_rate
    if cfg.frame_length < 2 * sample_rate / cfg.fmin:
        warnings.warn(
            f"frame_length {cfg.frame_length} is short for fmin {cfg.fmin} Hz; "
            "low-pitch candidates may be missed",
            stacklevel=2,
        )
    frames = _frame_signal(buf.samples, cfg.frame_length, cfg.hop)
    n_frames = frames.shape[0]
    half = cfg.frame_length // 2
    tau_min = max(2, int(np.ceil(sample_rate / cfg.fmax)))
    tau_max = min(half - 1, int(sample_rate / cfg.fmin))

    diff = _difference_function(frames, tau_max + 1)
    cmndf = _cmndf(diff)
    thresholds, prior = _threshold_prior(cfg.threshold_count)

    n_bins = int(np.floor(BINS_PER_OCTAVE * np.log2(cfg.fmax / cfg.fmin))) + 1
    bin_freqs = cfg.fmin * 2.0 ** (np.arange(n_bins) / BINS_PER_OCTAVE)

    obs = np.zeros((n_frames, 2 * n_bins))
    freq_weight = np.zeros((n_frames, n_bins))
    freq_sum = np.zeros((n_frames, n_bins))
    for t in range(n_frames):
        freqs, probs, voiced_mass = _frame_candidates(
            cmndf[t], tau_min, tau_max, thresholds, prior, sample_rate, cfg.fmin, cfg.fmax
        )
        if freqs.size:
            bins = np.clip(
                np.round(BINS_PER_OCTAVE * np.log2(freqs / cfg.fmin)).astype(int),
                0,
                n_bins - 1,
            )
            np.add.at(obs[t, :n_bins], bins, probs)
            np.add.at(freq_weight[t], bins, probs)
            np.add.at(freq_sum[t], bins, probs * freqs)
        # keep a sliver of unvoiced likelihood so the chain never degenerates
        obs[t, n_bins:] = max(1.0 - voiced_mass, 1e-9) / n_bins

    # local pitch movement: triangular window, width set by the maximum
    # transition rate in octaves per second
    frame_rate = sample_rate / cfg.hop
    max_jump = max(1, int(round(MAX_TRANSITION_OCTAVES_PER_SEC * BINS_PER_OCTAVE / frame_rate)))
    delta = np.abs(np.arange(n_bins)[:, None] - np.arange(n_bins)[None, :])
    local = np.maximum(0.0, max_jump + 1.0 - delta)
    local /= local.sum(axis=1, keepdims=True)
    p = cfg.voicing_switch_prob
    trans = np.block([[(1.0 - p) * local, p * local], [p * local, (1.0 - p) * local]])

    init = np.full(2 * n_bins, 1.0 / (2 * n_bins))

    with np.errstate(divide="ignore"):
        path = _viterbi_log(np.log(trans), np.log(init), np.log(obs))
    voiced_posterior = _forward_backward_voicing(trans, init, obs, n_bins)

    f0 = np.zeros(n_frames)
    voiced = voiced_posterior > 0.5
    for t in np.nonzero(voiced)[0]:
        b = path[t] % n_bins
        if freq_weight[t, b] > 0:
            f0[t] = freq_sum[t, b] / freq_weight[t, b]
        else:
            f0[t] = bin_freqs[b]
    return PitchTrack(f0=f0, voiced_prob=voiced_posterior, frame_rate=frame_rate)


def mean_pitch(track: PitchTrack) -> float:
    """Mean f0 over voiced frames; NaN when nothing is voiced."""
    voiced = track.f0[track.f0 > 0]
    if voiced.size == 0:
        return float("nan")
    return float(voiced.mean())
