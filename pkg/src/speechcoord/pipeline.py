"""Manifest-driven batch analysis.

One pass over a corpus produces, per utterance, MFCC and pitch features from
audio and/or ingested articulatory trajectories, coordination matrices and
eigenspectra for each feature stream, and phone-pair edit distances where
annotations exist. Group-level reductions then emit averaged spectra,
difference spectra against the native reference, accent-strength scores,
and pitch statistics as plot-ready CSV files.

Per-utterance failures never abort a run: each manifest record lands in
run_log.jsonl exactly once, as processed or skipped with a reason, and all
reductions iterate in sorted utterance-ID order so reports are byte-identical
regardless of worker count.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accent_strength, coordination
from .accent_strength import StrengthScore
from .acoustic_features import ANALYSIS_RATE, MfccConfig, PitchConfig, mfcc, pyin_pitch
from .articulatory_io import ChannelSeries, load_tv_series, save_tv_series, validate_series
from .audio_io import load_wav, resample
from .coordination import CoordConfig, Eigenspectrum, StackedCoordMatrix
from .manifest import EmptyManifest, Manifest, UtteranceRecord, load_manifest
from .transcription import extract_phone_pair, levenshtein, read_textgrid

log = logging.getLogger(__name__)

FEATURE_TV = "tv"
FEATURE_MFCC = "mfcc"


class PipelineError(Exception):
    pass


class NoNativeReference(PipelineError):
    pass


@dataclass
class RunConfig:
    manifest_path: Path
    output_dir: Path
    coord: CoordConfig = field(default_factory=CoordConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    strength_mode: str = "paired"
    norm: str = "frobenius"
    workers: int = 1
    eigens_ordering: str = "signed"
    tv_channels: tuple[str, ...] | None = None
    tv_frame_rate: float | None = None
    tier: str = "phones"
    normalized_spectra: bool = False
    use_cache: bool = True

    def __post_init__(self):
        self.manifest_path = Path(self.manifest_path)
        self.output_dir = Path(self.output_dir)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.strength_mode not in accent_strength.MODES:
            raise ValueError(f"strength_mode must be one of {accent_strength.MODES}")
        if self.norm not in accent_strength.NORMS:
            raise ValueError(f"norm must be one of {accent_strength.NORMS}")
        if self.eigens_ordering not in ("signed", "magnitude"):
            raise ValueError("eigens_ordering must be 'signed' or 'magnitude'")


@dataclass
class UtteranceResult:
    record: UtteranceRecord
    matrices: dict[str, StackedCoordMatrix] = field(default_factory=dict)
    spectra: dict[str, Eigenspectrum] = field(default_factory=dict)
    voiced_f0_sum: float = 0.0
    voiced_frames: int = 0
    has_pitch: bool = False
    lev_distance: int | None = None
    canonical_length: int | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def processed(self) -> bool:
        return bool(self.matrices) or self.has_pitch or self.lev_distance is not None


@dataclass
class RunSummary:
    config: RunConfig
    log_entries: list[dict]
    pitch_rows: list[dict]
    strength_scores: list[StrengthScore]
    group_spectra: dict[tuple[str, str], Eigenspectrum]
    diff_spectra: dict[tuple[str, str], Eigenspectrum]
    n_processed: int
    n_skipped: int
    report_paths: list[Path] = field(default_factory=list)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _feature_cache_key(wav_path: Path, cfg: RunConfig) -> str:
    h = hashlib.sha256()
    h.update(wav_path.read_bytes())
    h.update(repr((cfg.mfcc, cfg.pitch, ANALYSIS_RATE)).encode())
    return h.hexdigest()[:16]


def _extract_acoustic(record: UtteranceRecord, cfg: RunConfig, cache_dir: Path | None):
    """MFCC series plus pooled voiced-pitch statistics, via the cache if possible."""
    cache_path = None
    if cache_dir is not None:
        key = _feature_cache_key(record.wav_path, cfg)
        cache_path = cache_dir / f"{record.utterance_id}__{key}.csv"
        if cache_path.exists():
            cached = load_tv_series(cache_path)
            n_coeffs = cfg.mfcc.num_coeffs
            mfcc_series = ChannelSeries(
                values=cached.values[:n_coeffs],
                channel_names=cached.channel_names[:n_coeffs],
                frame_rate=cached.frame_rate,
            )
            f0 = cached.values[cached.channel_names.index("f0")]
            return mfcc_series, f0[f0 > 0]

    buf = load_wav(record.wav_path)
    if buf.sample_rate != ANALYSIS_RATE:
        buf = resample(buf, ANALYSIS_RATE)
    mfcc_series = mfcc(buf, cfg.mfcc)
    track = pyin_pitch(buf, cfg.pitch)

    if cache_path is not None:
        # pitch frames are padded with trailing unvoiced frames so both
        # streams fit one rectangular file; voiced statistics are unaffected
        n_frames = mfcc_series.num_frames
        f0 = np.zeros(n_frames)
        prob = np.zeros(n_frames)
        n_pitch = min(track.f0.size, n_frames)
        f0[:n_pitch] = track.f0[:n_pitch]
        prob[:n_pitch] = track.voiced_prob[:n_pitch]
        combined = ChannelSeries(
            values=np.vstack([mfcc_series.values, f0[None, :], prob[None, :]]),
            channel_names=mfcc_series.channel_names + ("f0", "voiced_prob"),
            frame_rate=mfcc_series.frame_rate,
        )
        cache_dir.mkdir(parents=True, exist_ok=True)
        save_tv_series(cache_path, combined)
    return mfcc_series, track.f0[track.f0 > 0]


def process_utterance(record: UtteranceRecord, cfg: RunConfig, cache_dir: Path | None = None) -> UtteranceResult:
    """Run every analysis stream available for one record; failures become notes."""
    result = UtteranceResult(record=record)

    if record.wav_path is not None:
        try:
            mfcc_series, voiced_f0 = _extract_acoustic(record, cfg, cache_dir)
            result.voiced_f0_sum = float(voiced_f0.sum())
            result.voiced_frames = int(voiced_f0.size)
            result.has_pitch = True
            m = coordination.build_stacked_matrix(mfcc_series, cfg.coord)
            result.matrices[FEATURE_MFCC] = m
            result.spectra[FEATURE_MFCC] = coordination.eigenspectrum(m, cfg.eigens_ordering)
        except Exception as exc:  # noqa: BLE001 - per-utterance isolation
            result.notes.append(f"acoustic: {exc}")

    if record.tv_path is not None:
        try:
            series = load_tv_series(record.tv_path, cfg.tv_channels, cfg.tv_frame_rate)
            report = validate_series(series)
            if not report.ok:
                bad = ", ".join(name for name, _ in report.degenerate_channels)
                raise coordination.CoordinationError(
                    f"validation failed (degenerate: [{bad}], nan_count={report.nan_count})"
                )
            m = coordination.build_stacked_matrix(series, cfg.coord)
            result.matrices[FEATURE_TV] = m
            result.spectra[FEATURE_TV] = coordination.eigenspectrum(m, cfg.eigens_ordering)
        except Exception as exc:  # noqa: BLE001
            result.notes.append(f"articulatory: {exc}")

    if record.textgrid_path is not None:
        try:
            grid = read_textgrid(record.textgrid_path)
            pair = extract_phone_pair(grid, cfg.tier)
            result.lev_distance = levenshtein(pair.canonical, pair.perceived)
            result.canonical_length = len(pair.canonical)
        except Exception as exc:  # noqa: BLE001
            result.notes.append(f"transcription: {exc}")

    return result


def _speaker_pitch_rows(results: list[UtteranceResult]) -> list[dict]:
    """Mean pitch per (l1, gender): voiced frames pooled per speaker, then
    speaker means averaged within the group."""
    per_speaker: dict[tuple[str, str, str], list[tuple[float, int]]] = {}
    for r in results:
        if r.voiced_frames > 0:
            key = (r.record.l1, r.record.gender, r.record.speaker_id)
            per_speaker.setdefault(key, []).append((r.voiced_f0_sum, r.voiced_frames))
    groups: dict[tuple[str, str], list[float]] = {}
    for (l1, gender, _speaker), stats in sorted(per_speaker.items()):
        total = sum(s for s, _ in stats)
        count = sum(c for _, c in stats)
        groups.setdefault((l1, gender), []).append(total / count)
    rows = []
    for (l1, gender), means in sorted(groups.items()):
        rows.append(
            {
                "l1": l1,
                "gender": gender,
                "n_speakers": len(means),
                "mean_pitch_hz": sum(means) / len(means),
            }
        )
    return rows


def _strength_for_feature(
    accent_results: list[UtteranceResult],
    native_results: list[UtteranceResult],
    feature: str,
    cfg: RunConfig,
) -> tuple[float | None, str | None]:
    accents = [r for r in accent_results if feature in r.matrices]
    natives = [r for r in native_results if feature in r.matrices]
    if not accents or not natives:
        return None, None
    mats_a = [r.matrices[feature] for r in accents]
    mats_n = [r.matrices[feature] for r in natives]
    mode = cfg.strength_mode
    note = None
    if mode == "paired":
        prompts_a = [r.record.prompt_id for r in accents]
        prompts_n = [r.record.prompt_id for r in natives]
        have_all = all(p is not None for p in prompts_a + prompts_n)
        covered = have_all and set(prompts_a) <= set(prompts_n)
        if not covered:
            mode = "group_mean"
            note = "pairing incomplete; used group_mean"
    if mode == "paired":
        score = accent_strength.strength_score(
            mats_a, mats_n, mode="paired",
            accent_prompts=prompts_a, native_prompts=prompts_n, norm=cfg.norm,
        )
    else:
        score = accent_strength.strength_score(mats_a, mats_n, mode="group_mean", norm=cfg.norm)
    return score, note


def run_pipeline(cfg: RunConfig) -> RunSummary:
    """Execute the full analysis over a manifest and write all reports."""
    manifest = load_manifest(cfg.manifest_path)
    if not manifest.records and not manifest.issues:
        raise EmptyManifest(f"{cfg.manifest_path} contains no records")

    records = sorted(manifest.records, key=lambda r: r.utterance_id)
    has_accent = any(r.group == "accent" for r in records)
    has_native = any(r.group == "native" for r in records)
    if has_accent and not has_native:
        raise NoNativeReference(
            "manifest has accent-group records but no native reference group"
        )
    if not has_accent:
        log.warning("manifest has no accent-group records; accent table will be empty")

    cache_dir = (cfg.output_dir / "cache") if cfg.use_cache else None

    def work(record: UtteranceRecord) -> UtteranceResult:
        return process_utterance(record, cfg, cache_dir)

    if cfg.workers == 1:
        results = [work(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, records))
    results.sort(key=lambda r: r.record.utterance_id)

    log_entries: list[dict] = []
    for issue in sorted(manifest.issues, key=lambda i: i.utterance_id):
        if issue.fatal_for_record:
            log_entries.append(
                {"utterance_id": issue.utterance_id, "status": "skipped", "reason": issue.reason}
            )
        else:
            log_entries.append(
                {"utterance_id": issue.utterance_id, "status": "warning", "reason": issue.reason}
            )
    for r in results:
        entry = {"utterance_id": r.record.utterance_id}
        if r.processed:
            entry["status"] = "processed"
            entry["features"] = sorted(r.matrices)
            if r.notes:
                entry["notes"] = r.notes
        else:
            entry["status"] = "skipped"
            entry["reason"] = "; ".join(r.notes) or "no analyzable content"
        log_entries.append(entry)

    processed = [r for r in results if r.processed]
    natives = [r for r in processed if r.record.group == "native"]
    accents = [r for r in processed if r.record.group == "accent"]

    # averaged eigenspectra per (group label, feature stream)
    group_spectra: dict[tuple[str, str], Eigenspectrum] = {}
    by_l1: dict[str, list[UtteranceResult]] = {}
    for r in processed:
        by_l1.setdefault(r.record.l1, []).append(r)
    for l1, rs in sorted(by_l1.items()):
        for feature in (FEATURE_TV, FEATURE_MFCC):
            spectra = [r.spectra[feature] for r in rs if feature in r.spectra]
            if spectra:
                group_spectra[(l1, feature)] = coordination.average_spectra(spectra)

    native_avg: dict[str, Eigenspectrum] = {}
    for feature in (FEATURE_TV, FEATURE_MFCC):
        spectra = [r.spectra[feature] for r in natives if feature in r.spectra]
        if spectra:
            native_avg[feature] = coordination.average_spectra(spectra)

    diff_spectra: dict[tuple[str, str], Eigenspectrum] = {}
    accent_l1s = sorted({r.record.l1 for r in accents})
    for l1 in accent_l1s:
        rs = [r for r in accents if r.record.l1 == l1]
        for feature in (FEATURE_TV, FEATURE_MFCC):
            if feature not in native_avg:
                continue
            spectra = [r.spectra[feature] for r in rs if feature in r.spectra]
            if spectra:
                diff_spectra[(l1, feature)] = coordination.difference_spectrum(
                    coordination.average_spectra(spectra), native_avg[feature]
                )

    strength_scores: list[StrengthScore] = []
    for l1 in accent_l1s:
        rs = [r for r in accents if r.record.l1 == l1]
        articulatory, note_tv = _strength_for_feature(rs, natives, FEATURE_TV, cfg)
        acoustic, note_mfcc = _strength_for_feature(rs, natives, FEATURE_MFCC, cfg)
        for note in (note_tv, note_mfcc):
            if note:
                log.warning("%s (%s)", note, l1)
        lev_pairs = [r for r in rs if r.lev_distance is not None]
        lev_mean = (
            sum(r.lev_distance for r in lev_pairs) / len(lev_pairs) if lev_pairs else None
        )
        strength_scores.append(
            StrengthScore(
                accent=l1,
                articulatory=articulatory,
                acoustic=acoustic,
                levenshtein_mean=lev_mean,
                n_utterances=len(rs),
            )
        )

    summary = RunSummary(
        config=cfg,
        log_entries=log_entries,
        pitch_rows=_speaker_pitch_rows(processed),
        strength_scores=strength_scores,
        group_spectra=group_spectra,
        diff_spectra=diff_spectra,
        n_processed=len(processed),
        n_skipped=len(results) - len(processed)
        + sum(1 for i in manifest.issues if i.fatal_for_record),
    )
    summary.report_paths = emit_reports(summary, cfg.output_dir)
    return summary


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def _safe_name(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def emit_reports(summary: RunSummary, output_dir) -> list[Path]:
    """Write pitch, strength, spectra, and run-log files; returns the paths."""
    output_dir = Path(output_dir)
    cfg = summary.config
    denom = 1.0
    if cfg.normalized_spectra and summary.group_spectra:
        any_spec = next(iter(summary.group_spectra.values()))
        denom = any_spec.num_channels * any_spec.delays_per_scale
    paths: list[Path] = []

    lines = ["l1,gender,n_speakers,mean_pitch_hz"]
    for row in summary.pitch_rows:
        lines.append(
            f"{row['l1']},{row['gender']},{row['n_speakers']},{_fmt(row['mean_pitch_hz'])}"
        )
    pitch_path = output_dir / "pitch_by_group.csv"
    _atomic_write(pitch_path, "\n".join(lines) + "\n")
    paths.append(pitch_path)

    lines = ["accent,articulatory_score,acoustic_score,levenshtein_mean,n_utterances"]
    for score in summary.strength_scores:
        cells = [
            score.accent,
            _fmt(score.articulatory) if score.articulatory is not None else "",
            _fmt(score.acoustic) if score.acoustic is not None else "",
            _fmt(score.levenshtein_mean) if score.levenshtein_mean is not None else "",
            str(score.n_utterances),
        ]
        lines.append(",".join(cells))
    strength_path = output_dir / "accent_strength.csv"
    _atomic_write(strength_path, "\n".join(lines) + "\n")
    paths.append(strength_path)

    for (label, feature), spectrum in sorted(summary.group_spectra.items()):
        for scale_idx, scale in enumerate(spectrum.scales):
            rows = ["rank,value"]
            for rank, v in enumerate(spectrum.per_scale[scale_idx], start=1):
                rows.append(f"{rank},{_fmt(v / denom)}")
            p = output_dir / "eigenspectra" / f"{_safe_name(label)}_{feature}_{scale}.csv"
            _atomic_write(p, "\n".join(rows) + "\n")
            paths.append(p)

    for (label, feature), spectrum in sorted(summary.diff_spectra.items()):
        for scale_idx, scale in enumerate(spectrum.scales):
            rows = ["rank,delta"]
            for rank, v in enumerate(spectrum.per_scale[scale_idx], start=1):
                rows.append(f"{rank},{_fmt(v / denom)}")
            p = output_dir / "diffspectra" / f"{_safe_name(label)}_{feature}_{scale}.csv"
            _atomic_write(p, "\n".join(rows) + "\n")
            paths.append(p)

    log_path = output_dir / "run_log.jsonl"
    _atomic_write(
        log_path,
        "".join(json.dumps(e, sort_keys=True) + "\n" for e in summary.log_entries),
    )
    paths.append(log_path)
    return paths
