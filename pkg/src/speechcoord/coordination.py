"""Channel-delay correlation matrices and their eigenspectra.

The central structure is built from normalized delayed correlations between
channel pairs,

    r[d, i, j] = sum_{t=1..T-d} s_i[t] * s_j[t+d] / sqrt(r0_ii * r0_jj),

with r0_kk the full zero-lag autocorrelation sum(s_k[t]^2) and negative
delays defined by r[-d, i, j] = r[d, j, i]. For each delay scale n the
correlations are sampled at multiples n*(q-p), p,q in 1..P, giving a K x K
grid of P x P blocks (one KP x KP symmetric matrix per scale); the per-scale
matrices are then stacked vertically into a len(scales)*KP x KP matrix.

Eigenspectra of the per-scale matrices, rank-ordered, summarize how channel
coordination distributes variance across directions: concentrated spectra
mean tightly coupled channels, flat spectra mean independent movement.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .articulatory_io import ChannelSeries

SYMMETRY_TOL = 1e-10
DEGENERACY_EPS = 1e-8


class CoordinationError(Exception):
    pass


class DegenerateChannel(CoordinationError):
    def __init__(self, name: str):
        self.channel = name
        super().__init__(f"channel {name!r} is (near-)constant; correlation undefined")


class DelayTooLarge(CoordinationError):
    def __init__(self, delay: int, n_frames: int):
        super().__init__(f"|delay| {abs(delay)} must be below series length {n_frames}")


class UtteranceTooShort(CoordinationError):
    def __init__(self, n_frames: int, required: int):
        self.n_frames = n_frames
        self.required = required
        super().__init__(f"series has {n_frames} frames; need more than {required}")


class ConvergenceFailure(CoordinationError):
    def __init__(self, scale: int):
        self.scale = scale
        super().__init__(f"eigendecomposition failed to converge at scale {scale}")


class ShapeMismatch(CoordinationError):
    pass


@dataclass(frozen=True)
class CoordConfig:
    """Delay-scale layout: scales n, delays per scale P, z-score switch."""

    scales: tuple[int, ...] = (1, 3, 5, 7)
    delays_per_scale: int = 10
    zscore: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(n) for n in self.scales))
        if not self.scales or any(n <= 0 for n in self.scales):
            raise ValueError("scales must be positive integers")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly increasing")
        if self.delays_per_scale < 2:
            raise ValueError("delays_per_scale must be at least 2")

    def min_frames(self) -> int:
        return max(self.scales) * (self.delays_per_scale - 1) + 10


@dataclass(frozen=True)
class StackedCoordMatrix:
    """Per-scale KP x KP correlation matrices plus their vertical stack.

    Matrices produced by `build_stacked_matrix` are symmetric with unit
    diagonal; instances assembled by averaging or arithmetic (e.g. group
    means) reuse the container without those guarantees.
    """

    per_scale: tuple[np.ndarray, ...]
    stacked: np.ndarray
    num_channels: int
    delays_per_scale: int
    scales: tuple[int, ...]

    def layout(self) -> tuple[int, int, tuple[int, ...]]:
        return (self.num_channels, self.delays_per_scale, self.scales)


@dataclass(frozen=True)
class Eigenspectrum:
    """Rank-ordered eigenvalues of each per-scale matrix."""

    per_scale: tuple[np.ndarray, ...]
    ordering_mode: str
    num_channels: int
    delays_per_scale: int
    scales: tuple[int, ...]

    def layout(self) -> tuple[int, int, tuple[int, ...], str]:
        return (self.num_channels, self.delays_per_scale, self.scales, self.ordering_mode)


def z_score(series: ChannelSeries) -> ChannelSeries:
    """Normalize every channel to mean 0, population std 1."""
    values = series.values
    means = values.mean(axis=1, keepdims=True)
    stds = values.std(axis=1, keepdims=True)
    for name, s in zip(series.channel_names, stds[:, 0]):
        if s < DEGENERACY_EPS:
            raise DegenerateChannel(name)
    return ChannelSeries(
        values=(values - means) / stds,
        channel_names=series.channel_names,
        frame_rate=series.frame_rate,
    )


def delayed_correlation(series: ChannelSeries, i: int, j: int, d: int) -> float:
    """Normalized delayed correlation between channels i and j at signed delay d."""
    values = series.values
    n_frames = values.shape[1]
    if abs(d) >= n_frames:
        raise DelayTooLarge(d, n_frames)
    if d < 0:
        i, j, d = j, i, -d
    vi, vj = values[i], values[j]
    r0_i = float(np.dot(vi, vi))
    r0_j = float(np.dot(vj, vj))
    if r0_i <= 0.0 or r0_j <= 0.0:
        raise DegenerateChannel(series.channel_names[i if r0_i <= 0.0 else j])
    num = float(np.dot(vi[: n_frames - d], vj[d:]))
    return num / np.sqrt(r0_i * r0_j)


def _all_delay_correlations(values: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """r[d, i, j] for every requested non-negative delay, via FFT cross-correlation."""
    k, t = values.shape
    fft_size = scipy.fft.next_fast_len(2 * t)
    spec = scipy.fft.rfft(values, n=fft_size, axis=1)
    # cross[i, j, d] = sum_t values[i, t] * values[j, t + d]
    cross = scipy.fft.irfft(np.conj(spec[:, None, :]) * spec[None, :, :], n=fft_size, axis=2)
    r0 = np.einsum("kt,kt->k", values, values)
    if np.any(r0 <= 0.0):
        raise DegenerateChannel(f"channel index {int(np.argmin(r0))}")
    norm = np.sqrt(np.outer(r0, r0))
    return cross[:, :, delays].transpose(2, 0, 1) / norm[None, :, :]


def build_stacked_matrix(series: ChannelSeries, cfg: CoordConfig = CoordConfig()) -> StackedCoordMatrix:
    """Assemble the per-scale channel-delay correlation matrices and their stack.

    Block (i, j) of scale n holds the P x P grid of correlations at delays
    n*(q-p); entries at negative delays reuse the transposed positive-delay
    values, so each per-scale matrix is symmetric by construction with unit
    diagonal. Channels are z-scored per series unless cfg.zscore is False.
    """
    n_frames = series.num_frames
    if n_frames <= cfg.min_frames():
        raise UtteranceTooShort(n_frames, cfg.min_frames())
    if cfg.zscore:
        series = z_score(series)

    k = series.num_channels
    p = cfg.delays_per_scale
    steps = np.arange(p)
    needed = np.unique(np.concatenate([n * steps for n in cfg.scales]))
    corr = _all_delay_correlations(series.values, needed)
    by_delay = {int(d): corr[w] for w, d in enumerate(needed)}

    rows = np.arange(k) * p
    per_scale = []
    for n in cfg.scales:
        m = np.empty((k * p, k * p))
        for a in range(p):
            for b in range(a, p):
                slab = by_delay[n * (b - a)]
                m[np.ix_(rows + a, rows + b)] = slab
                if b != a:
                    m[np.ix_(rows + b, rows + a)] = slab.T
        per_scale.append(m)

    for n, m in zip(cfg.scales, per_scale):
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
            raise CoordinationError(f"scale {n}: matrix asymmetry above tolerance")
        if np.max(np.abs(np.diag(m) - 1.0)) > SYMMETRY_TOL:
            raise CoordinationError(f"scale {n}: diagonal deviates from 1")

    return StackedCoordMatrix(
        per_scale=tuple(per_scale),
        stacked=np.vstack(per_scale),
        num_channels=k,
        delays_per_scale=p,
        scales=cfg.scales,
    )


def eigenspectrum(matrix: StackedCoordMatrix, ordering: str = "signed") -> Eigenspectrum:
    """Eigenvalues of each per-scale matrix, rank-ordered.

    ordering="signed" sorts descending by value (the default; keeps difference
    spectra interpretable when small negative eigenvalues occur);
    ordering="magnitude" sorts descending by absolute value.
    """
    if ordering not in ("signed", "magnitude"):
        raise ValueError(f"unknown ordering {ordering!r}")
    spectra = []
    for n, m in zip(matrix.scales, matrix.per_scale):
        try:
            vals = np.linalg.eigvalsh(m)
        except np.linalg.LinAlgError:
            raise ConvergenceFailure(n) from None
        vals = vals[::-1]
        if ordering == "magnitude":
            vals = vals[np.argsort(-np.abs(vals), kind="stable")]
        spectra.append(vals)
    return Eigenspectrum(
        per_scale=tuple(spectra),
        ordering_mode=ordering,
        num_channels=matrix.num_channels,
        delays_per_scale=matrix.delays_per_scale,
        scales=matrix.scales,
    )


def average_spectra(spectra: list[Eigenspectrum]) -> Eigenspectrum:
    """Element-wise mean at each rank, per scale."""
    if not spectra:
        raise ShapeMismatch("cannot average an empty spectrum list")
    layout = spectra[0].layout()
    for s in spectra[1:]:
        if s.layout() != layout:
            raise ShapeMismatch(f"spectrum layout {s.layout()} differs from {layout}")
    averaged = tuple(
        np.mean([s.per_scale[w] for s in spectra], axis=0)
        for w in range(len(layout[2]))
    )
    return Eigenspectrum(
        per_scale=averaged,
        ordering_mode=spectra[0].ordering_mode,
        num_channels=spectra[0].num_channels,
        delays_per_scale=spectra[0].delays_per_scale,
        scales=spectra[0].scales,
    )


def difference_spectrum(group: Eigenspectrum, reference: Eigenspectrum) -> Eigenspectrum:
    """Rank-wise group minus reference, per scale."""
    if group.layout() != reference.layout():
        raise ShapeMismatch(
            f"spectrum layout {group.layout()} differs from {reference.layout()}"
        )
    return Eigenspectrum(
        per_scale=tuple(g - r for g, r in zip(group.per_scale, reference.per_scale)),
        ordering_mode=group.ordering_mode,
        num_channels=group.num_channels,
        delays_per_scale=group.delays_per_scale,
        scales=group.scales,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_matrix_csv(path, matrix: StackedCoordMatrix) -> None:
    """Stacked matrix as CSV with a two-line header (shape; scales)."""
    rows, cols = matrix.stacked.shape
    lines = [
        f"# shape={rows}x{cols} channels={matrix.num_channels} delays={matrix.delays_per_scale}",
        "# scales=" + ",".join(str(n) for n in matrix.scales),
    ]
    for row in matrix.stacked:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix_csv(path) -> StackedCoordMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# shape=") or not lines[1].startswith("# scales="):
        raise ShapeMismatch("matrix CSV must start with shape and scales header lines")
    meta = dict(part.split("=") for part in lines[0][2:].split())
    scales = tuple(int(n) for n in lines[1].split("=", 1)[1].split(","))
    k = int(meta["channels"])
    p = int(meta["delays"])
    stacked = np.array([[float(c) for c in ln.split(",")] for ln in lines[2:] if ln.strip()])
    expected = (len(scales) * k * p, k * p)
    if stacked.shape != expected:
        raise ShapeMismatch(f"matrix body {stacked.shape} does not match header {expected}")
    per_scale = tuple(stacked[w * k * p : (w + 1) * k * p] for w in range(len(scales)))
    return StackedCoordMatrix(
        per_scale=per_scale,
        stacked=stacked,
        num_channels=k,
        delays_per_scale=p,
        scales=scales,
    )


def save_spectrum_csv(path, spectrum: Eigenspectrum, normalize: bool = False) -> None:
    """Long-format spectrum CSV: scale,rank,value (rank is 1-based)."""
    denom = spectrum.num_channels * spectrum.delays_per_scale if normalize else 1.0
    lines = ["scale,rank,value"]
    for n, vals in zip(spectrum.scales, spectrum.per_scale):
        for rank, v in enumerate(vals, start=1):
            lines.append(f"{n},{rank},{float(v / denom)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
