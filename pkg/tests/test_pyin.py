import numpy as np
import pytest

from speechcoord.acoustic_features import PitchConfig, TooShort, mean_pitch, pyin_pitch
from speechcoord.acoustic_features import PitchTrack
from speechcoord.audio_io import AudioBuffer
from conftest import tone


def autocorr_peak_freq(x: np.ndarray, sample_rate: int, fmin=60.0, fmax=400.0) -> float:
    """Oracle: period from the first near-maximal autocorrelation peak
    (smallest lag, so period multiples cannot masquerade as the period)."""
    lag_min = int(np.ceil(sample_rate / fmax))
    lag_max = int(sample_rate / fmin)
    ac = np.correlate(x, x, mode="full")[x.size - 1 :]
    threshold = 0.8 * ac[0]
    lag = None
    for cand in range(lag_min, lag_max + 1):
        if ac[cand] >= threshold and ac[cand] >= ac[cand - 1] and ac[cand] >= ac[cand + 1]:
            lag = cand
            break
    if lag is None:
        lag = lag_min + int(np.argmax(ac[lag_min : lag_max + 1]))
    a, b, c = ac[lag - 1], ac[lag], ac[lag + 1]
    denom = a - 2 * b + c
    refined = lag + (0.5 * (a - c) / denom if denom != 0 else 0.0)
    return sample_rate / refined


@pytest.mark.parametrize("freq", [120.0, 220.0, 330.0])
def test_tone_tracks_within_two_percent(freq):
    buf = tone(freq, 2.0)
    expected = autocorr_peak_freq(buf.samples, buf.sample_rate)
    track = pyin_pitch(buf)
    voiced = track.f0[track.f0 > 0]
    interior = track.f0[2:-2]
    assert np.mean(interior > 0) >= 0.95
    assert abs(np.median(voiced) - expected) <= 0.02 * expected


def test_silence_mostly_unvoiced():
    track = pyin_pitch(AudioBuffer(np.zeros(32000), 16000))
    assert np.mean(track.f0 == 0) >= 0.95


def test_two_segment_tone():
    sr = 16000
    t = np.arange(sr) / sr
    x = np.concatenate(
        [0.5 * np.sin(2 * np.pi * 120.0 * t), 0.5 * np.sin(2 * np.pi * 240.0 * t)]
    )
    cfg = PitchConfig()
    track = pyin_pitch(AudioBuffer(x, sr), cfg)
    # frames whose whole window sits inside one half
    n = track.f0.size
    first = [i for i in range(n) if i * cfg.hop + cfg.frame_length <= sr]
    second = [i for i in range(n) if i * cfg.hop >= sr]
    f1 = track.f0[first]
    f2 = track.f0[second]
    exp1 = autocorr_peak_freq(x[:sr], sr)
    exp2 = autocorr_peak_freq(x[sr:], sr)
    assert abs(np.median(f1[f1 > 0]) - exp1) <= 0.02 * exp1
    assert abs(np.median(f2[f2 > 0]) - exp2) <= 0.02 * exp2
    misassigned = sum(1 for f in f1 if f > 0 and abs(f - 120.0) > 0.1 * 120.0)
    misassigned += sum(1 for f in f2 if f > 0 and abs(f - 240.0) > 0.1 * 240.0)
    assert misassigned <= 5


def test_voiced_estimates_stay_in_range(rng):
    # noisy harmonic signal; every voiced estimate must lie in [fmin, fmax]
    sr = 16000
    t = np.arange(sr) / sr
    x = 0.4 * np.sin(2 * np.pi * 180 * t) + 0.2 * np.sin(2 * np.pi * 360 * t)
    x += 0.05 * rng.standard_normal(sr)
    cfg = PitchConfig()
    track = pyin_pitch(AudioBuffer(x, sr), cfg)
    voiced = track.f0[track.f0 > 0]
    assert voiced.size > 0
    assert voiced.min() >= cfg.fmin
    assert voiced.max() <= cfg.fmax


def test_voicing_flag_matches_zero_f0():
    buf = tone(220.0, 1.0)
    track = pyin_pitch(buf)
    np.testing.assert_array_equal(track.f0 > 0, track.voiced_prob > 0.5)


def test_too_short():
    with pytest.raises(TooShort):
        pyin_pitch(AudioBuffer(np.zeros(1000), 16000))


def test_short_frame_warns():
    cfg = PitchConfig(frame_length=512, fmin=60.0)
    with pytest.warns(UserWarning, match="frame_length"):
        pyin_pitch(tone(220.0, 0.5), cfg)


def test_mean_pitch_all_voiced():
    track = PitchTrack(np.full(50, 200.0), np.ones(50), 100.0)
    assert mean_pitch(track) == 200.0


def test_mean_pitch_ignores_unvoiced():
    f0 = np.concatenate([np.full(25, 100.0), np.zeros(25)])
    prob = np.concatenate([np.ones(25), np.zeros(25)])
    assert mean_pitch(PitchTrack(f0, prob, 100.0)) == 100.0


def test_mean_pitch_empty_is_nan():
    assert np.isnan(mean_pitch(PitchTrack(np.zeros(10), np.zeros(10), 100.0)))


def test_mean_pitch_invariant_to_appended_unvoiced():
    f0 = np.array([150.0, 160.0, 0.0, 155.0])
    prob = np.array([0.9, 0.8, 0.1, 0.95])
    base = mean_pitch(PitchTrack(f0, prob, 100.0))
    extended = mean_pitch(
        PitchTrack(np.concatenate([f0, np.zeros(20)]), np.concatenate([prob, np.zeros(20)]), 100.0)
    )
    assert base == extended


def test_pitch_config_invariants():
    with pytest.raises(ValueError):
        PitchConfig(fmin=400.0, fmax=100.0)
    with pytest.raises(ValueError):
        PitchConfig(voicing_switch_prob=0.0)
    with pytest.raises(ValueError):
        PitchConfig(threshold_count=1)


def test_frame_rate_matches_mfcc_default():
    track = pyin_pitch(tone(220.0, 1.0))
    assert track.frame_rate == 100.0
