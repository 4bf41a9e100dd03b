"""Ingestion and validation of externally produced channel trajectories.

Vocal-tract-variable trajectories arrive as CSV files produced by an external
speech-inversion system: an optional ``#frame_rate=<float>`` line, a header of
channel names, then one row of K values per frame. The same ChannelSeries
container is reused for MFCC matrices and cached feature files, so the reader
and writer here are the interchange layer for every per-frame feature type.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_FRAME_RATE = 100.0
DEGENERACY_EPS = 1e-8

# channel order produced by the upstream speech-inversion system
TV_CHANNELS = ("LA", "LP", "TTCD", "TTCL", "TBCD", "TBCL")


class ChannelSeriesError(Exception):
    """Base class for channel-series ingestion failures."""


class MissingChannel(ChannelSeriesError):
    def __init__(self, name: str):
        self.channel = name
        super().__init__(f"channel {name!r} not present in file")


class RowLengthMismatch(ChannelSeriesError):
    def __init__(self, row: int, expected: int, found: int):
        self.row = row
        super().__init__(f"row {row}: expected {expected} values, found {found}")


class NonNumericCell(ChannelSeriesError):
    def __init__(self, row: int, column: int, text: str):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column}: {text!r} is not a number")


@dataclass(frozen=True)
class ChannelSeries:
    """K x T matrix of per-frame feature trajectories at a fixed frame rate."""

    values: np.ndarray
    channel_names: tuple[str, ...]
    frame_rate: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if values.ndim != 2:
            raise ValueError("values must be a 2-D (channels x frames) array")
        k, t = values.shape
        if k < 2 or t < 2:
            raise ValueError(f"need at least 2 channels and 2 frames, got {k}x{t}")
        if len(self.channel_names) != k:
            raise ValueError("channel_names length does not match value rows")
        if len(set(self.channel_names)) != k:
            raise ValueError("channel names must be unique")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ValidationReport:
    degenerate_channels: tuple[tuple[str, float], ...]
    nan_count: int
    length_frames: int

    @property
    def ok(self) -> bool:
        return not self.degenerate_channels and self.nan_count == 0


def load_tv_series(path, expected_channels=None, frame_rate: float | None = None) -> ChannelSeries:
    """Load a channel-trajectory CSV into a ChannelSeries.

    `expected_channels` fixes the channel set and in-memory order regardless of
    file column order; None accepts the file's own header. `frame_rate` of None
    falls back to the file's ``#frame_rate=`` line, then to 100 frames/s.

    Raises MissingChannel, RowLengthMismatch, or NonNumericCell.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw_lines = fh.read().splitlines()

    sidecar_rate = None
    idx = 0
    while idx < len(raw_lines) and raw_lines[idx].startswith("#"):
        line = raw_lines[idx].strip()
        if line.startswith("#frame_rate="):
            sidecar_rate = float(line.split("=", 1)[1])
        idx += 1
    if idx >= len(raw_lines):
        raise ChannelSeriesError("file has no header line")

    header = [name.strip() for name in raw_lines[idx].split(",")]
    data_lines = [ln for ln in raw_lines[idx + 1 :] if ln.strip()]

    n_cols = len(header)
    rows = np.empty((len(data_lines), n_cols), dtype=np.float64)
    for r, line in enumerate(data_lines):
        cells = line.split(",")
        if len(cells) != n_cols:
            raise RowLengthMismatch(r, n_cols, len(cells))
        for c, cell in enumerate(cells):
            try:
                rows[r, c] = float(cell)
            except ValueError:
                raise NonNumericCell(r, c, cell.strip()) from None

    if expected_channels is None:
        names = tuple(header)
        values = rows.T
    else:
        names = tuple(expected_channels)
        positions = []
        for name in names:
            if name not in header:
                raise MissingChannel(name)
            positions.append(header.index(name))
        values = rows[:, positions].T

    rate = frame_rate if frame_rate is not None else (sidecar_rate or DEFAULT_FRAME_RATE)
    return ChannelSeries(values=values, channel_names=names, frame_rate=float(rate))


def save_tv_series(path, series: ChannelSeries) -> None:
    """Write a ChannelSeries in the same CSV format `load_tv_series` reads.

    Values are written with shortest round-trip repr, so load(save(s)) is exact.
    """
    lines = [f"#frame_rate={float(series.frame_rate)!r}", ",".join(series.channel_names)]
    for frame in series.values.T:
        lines.append(",".join(repr(float(v)) for v in frame))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def validate_series(series: ChannelSeries, eps: float = DEGENERACY_EPS) -> ValidationReport:
    """Report near-constant channels (std < eps) and non-finite entries."""
    degenerate = []
    finite = np.isfinite(series.values)
    for name, channel, fin in zip(series.channel_names, series.values, finite):
        good = channel[fin]
        std = float(good.std()) if good.size else 0.0
        if std < eps:
            degenerate.append((name, std))
    nan_count = int((~finite).sum())
    return ValidationReport(
        degenerate_channels=tuple(degenerate),
        nan_count=nan_count,
        length_frames=series.num_frames,
    )
