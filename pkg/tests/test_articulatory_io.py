import numpy as np
import pytest

from speechcoord.articulatory_io import (
    ChannelSeries,
    MissingChannel,
    NonNumericCell,
    RowLengthMismatch,
    TV_CHANNELS,
    load_tv_series,
    save_tv_series,
    validate_series,
)

HEADER = ",".join(TV_CHANNELS)


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_basic_parse(tmp_path):
    rows = "\n".join(",".join(str(0.1 * (r + c)) for c in range(6)) for r in range(300))
    path = write_csv(tmp_path / "tv.csv", f"{HEADER}\n{rows}\n")
    series = load_tv_series(path, TV_CHANNELS)
    assert series.num_channels == 6
    assert series.num_frames == 300
    assert series.frame_rate == 100.0
    assert series.channel_names == TV_CHANNELS


def test_missing_channel(tmp_path):
    header = ",".join(TV_CHANNELS[:-1])
    path = write_csv(tmp_path / "tv.csv", f"{header}\n" + "1,2,3,4,5\n" * 3)
    with pytest.raises(MissingChannel) as err:
        load_tv_series(path, TV_CHANNELS)
    assert err.value.channel == "TBCL"


def test_non_numeric_cell_coordinates(tmp_path):
    lines = [HEADER]
    for r in range(8):
        cells = ["1.0"] * 6
        if r == 5:
            cells[2] = "abc"
        lines.append(",".join(cells))
    path = write_csv(tmp_path / "tv.csv", "\n".join(lines) + "\n")
    with pytest.raises(NonNumericCell) as err:
        load_tv_series(path, TV_CHANNELS)
    assert (err.value.row, err.value.column) == (5, 2)


def test_row_length_mismatch(tmp_path):
    text = f"{HEADER}\n" + "1,2,3,4,5,6\n" * 4 + "1,2,3\n"
    path = write_csv(tmp_path / "tv.csv", text)
    with pytest.raises(RowLengthMismatch) as err:
        load_tv_series(path, TV_CHANNELS)
    assert err.value.row == 4


def test_column_reordering(tmp_path, rng):
    values = rng.standard_normal((6, 40))
    shuffled = ("TBCL", "LA", "TTCD", "LP", "TBCD", "TTCL")
    lines = [",".join(shuffled)]
    by_name = dict(zip(shuffled, values))
    for t in range(40):
        lines.append(",".join(repr(float(by_name[n][t])) for n in shuffled))
    path = write_csv(tmp_path / "tv.csv", "\n".join(lines) + "\n")
    series = load_tv_series(path, TV_CHANNELS)
    assert series.channel_names == TV_CHANNELS
    for i, name in enumerate(TV_CHANNELS):
        np.testing.assert_array_equal(series.values[i], by_name[name])


def test_sidecar_frame_rate(tmp_path):
    text = f"#frame_rate=200.0\n{HEADER}\n" + "1,2,3,4,5,6\n0,1,2,3,4,5\n"
    path = write_csv(tmp_path / "tv.csv", text)
    assert load_tv_series(path, TV_CHANNELS).frame_rate == 200.0
    # explicit caller rate wins over the sidecar
    assert load_tv_series(path, TV_CHANNELS, frame_rate=50.0).frame_rate == 50.0


def test_crlf_tolerated(tmp_path):
    text = f"{HEADER}\r\n1,2,3,4,5,6\r\n6,5,4,3,2,1\r\n"
    path = tmp_path / "tv.csv"
    path.write_bytes(text.encode("utf-8"))
    series = load_tv_series(path, TV_CHANNELS)
    assert series.num_frames == 2


def test_save_load_roundtrip(tmp_path, rng):
    series = ChannelSeries(rng.standard_normal((6, 100)), TV_CHANNELS, 100.0)
    path = tmp_path / "out.csv"
    save_tv_series(path, series)
    back = load_tv_series(path, TV_CHANNELS)
    assert np.abs(back.values - series.values).max() < 1e-9
    assert back.frame_rate == series.frame_rate


def test_validate_constant_channel():
    values = np.vstack([np.full(50, 3.2), np.arange(50, dtype=float)])
    report = validate_series(ChannelSeries(values, ("flat", "ramp"), 100.0))
    assert len(report.degenerate_channels) == 1
    name, std = report.degenerate_channels[0]
    assert name == "flat" and std < 1e-12
    assert report.nan_count == 0
    assert report.length_frames == 50
    assert not report.ok


def test_validate_healthy_random(rng):
    series = ChannelSeries(rng.standard_normal((6, 200)), TV_CHANNELS, 100.0)
    report = validate_series(series)
    assert report.degenerate_channels == ()
    assert report.nan_count == 0
    assert report.ok


def test_validate_counts_nan(rng):
    values = rng.standard_normal((6, 200))
    values[2, 17] = np.nan
    report = validate_series(ChannelSeries(values, TV_CHANNELS, 100.0))
    assert report.nan_count == 1


def test_series_invariants():
    with pytest.raises(ValueError):
        ChannelSeries(np.zeros((1, 10)), ("only",), 100.0)
    with pytest.raises(ValueError):
        ChannelSeries(np.zeros((2, 1)), ("a", "b"), 100.0)
    with pytest.raises(ValueError):
        ChannelSeries(np.zeros((2, 10)), ("a", "a"), 100.0)
