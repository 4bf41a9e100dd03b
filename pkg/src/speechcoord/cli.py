"""Command-line entry points.

Subcommands: `run` (full pipeline), `extract` (feature cache only), `coord`
(group matrices and spectra), `strength` (accent-strength table), `pitch`
(pitch table), and `synth` (synthetic fixture generator). Exit codes:
0 success, 1 fatal configuration or manifest error, 2 completed with skips.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .accent_strength import MODES, NORMS
from .acoustic_features import MfccConfig, PitchConfig
from .articulatory_io import ChannelSeries, TV_CHANNELS, save_tv_series
from .coordination import CoordConfig
from .manifest import ManifestError, write_manifest
from .pipeline import PipelineError, RunConfig, process_utterance, run_pipeline
from .synth import KIND_NOISE_RATIOS, SynthSpec, gen_coordinated

log = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


_CONFIG_KEYS = {
    "workers": int,
    "norm": str,
    "strength_mode": str,
    "eigens_ordering": str,
    "normalized_spectra": lambda v: v.lower() in ("1", "true", "yes"),
    "tier": str,
    "tv_frame_rate": float,
    "tv_channels": lambda v: tuple(s.strip() for s in v.split(",")),
    "coord.scales": lambda v: tuple(int(s) for s in v.split(",")),
    "coord.delays_per_scale": int,
    "coord.zscore": lambda v: v.lower() in ("1", "true", "yes"),
    "mfcc.frame_length": int,
    "mfcc.hop": int,
    "mfcc.fft_size": int,
    "mfcc.mel_filters": int,
    "mfcc.num_coeffs": int,
    "mfcc.mel_fmin": float,
    "mfcc.mel_fmax": float,
    "mfcc.log_floor": float,
    "pitch.frame_length": int,
    "pitch.hop": int,
    "pitch.fmin": float,
    "pitch.fmax": float,
    "pitch.threshold_count": int,
    "pitch.voicing_switch_prob": float,
}


def parse_config_file(path) -> dict:
    """Read `key = value` lines; '#' starts a comment; keys mirror RunConfig."""
    values: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _build_run_config(args) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}

    def pick(key, cli_value, default):
        if cli_value is not None:
            return cli_value
        return file_values.get(key, default)

    coord_defaults = CoordConfig()
    coord = CoordConfig(
        scales=pick("coord.scales", args.scales, coord_defaults.scales),
        delays_per_scale=pick(
            "coord.delays_per_scale", args.delays_per_scale, coord_defaults.delays_per_scale
        ),
        zscore=pick("coord.zscore", False if args.no_zscore else None, coord_defaults.zscore),
    )
    mfcc_kwargs = {
        name: file_values[f"mfcc.{name}"]
        for name in (
            "frame_length", "hop", "fft_size", "mel_filters",
            "num_coeffs", "mel_fmin", "mel_fmax", "log_floor",
        )
        if f"mfcc.{name}" in file_values
    }
    pitch_kwargs = {
        name: file_values[f"pitch.{name}"]
        for name in (
            "frame_length", "hop", "fmin", "fmax",
            "threshold_count", "voicing_switch_prob",
        )
        if f"pitch.{name}" in file_values
    }
    tv_channels = pick("tv_channels", args.tv_channels, None)
    try:
        return RunConfig(
            manifest_path=Path(args.manifest),
            output_dir=Path(args.out),
            coord=coord,
            mfcc=MfccConfig(**mfcc_kwargs),
            pitch=PitchConfig(**pitch_kwargs),
            strength_mode=pick("strength_mode", args.strength_mode, "paired"),
            norm=pick("norm", args.norm, "frobenius"),
            workers=pick("workers", args.workers, 1),
            eigens_ordering=pick("eigens_ordering", args.ordering, "signed"),
            tv_channels=tuple(tv_channels) if tv_channels else None,
            tv_frame_rate=pick("tv_frame_rate", args.tv_frame_rate, None),
            tier=pick("tier", args.tier, "phones"),
            normalized_spectra=pick(
                "normalized_spectra", True if args.normalized_spectra else None, False
            ),
            use_cache=not args.no_cache,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="corpus manifest CSV")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--config", help="key = value config file overriding defaults")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--norm", choices=NORMS, default=None)
    parser.add_argument("--strength-mode", dest="strength_mode", choices=MODES, default=None)
    parser.add_argument("--ordering", choices=("signed", "magnitude"), default=None)
    parser.add_argument("--scales", type=lambda v: tuple(int(s) for s in v.split(",")), default=None)
    parser.add_argument("--delays-per-scale", dest="delays_per_scale", type=int, default=None)
    parser.add_argument("--no-zscore", action="store_true")
    parser.add_argument("--tv-channels", dest="tv_channels",
                        type=lambda v: tuple(s.strip() for s in v.split(",")), default=None)
    parser.add_argument("--tv-frame-rate", dest="tv_frame_rate", type=float, default=None)
    parser.add_argument("--tier", default=None)
    parser.add_argument("--normalized-spectra", action="store_true")
    parser.add_argument("--no-cache", action="store_true")


def _cmd_run(args) -> int:
    cfg = _build_run_config(args)
    summary = run_pipeline(cfg)
    print(
        f"processed {summary.n_processed} utterances, skipped {summary.n_skipped}; "
        f"{len(summary.report_paths)} report files in {cfg.output_dir}"
    )
    return 2 if summary.n_skipped else 0


def _cmd_extract(args) -> int:
    cfg = _build_run_config(args)
    from .manifest import load_manifest

    manifest = load_manifest(cfg.manifest_path)
    cache_dir = cfg.output_dir / "cache"
    n_done = n_skip = 0
    for record in sorted(manifest.records, key=lambda r: r.utterance_id):
        if record.wav_path is None:
            continue
        result = process_utterance(record, cfg, cache_dir)
        if result.has_pitch:
            n_done += 1
        else:
            n_skip += 1
            log.warning("%s: %s", record.utterance_id, "; ".join(result.notes))
    print(f"extracted features for {n_done} utterances into {cache_dir}")
    return 2 if n_skip else 0


def _cmd_coord(args) -> int:
    cfg = _build_run_config(args)
    summary = run_pipeline(cfg)
    print(f"wrote spectra for {len(summary.group_spectra)} group/feature pairs")
    return 2 if summary.n_skipped else 0


def _cmd_strength(args) -> int:
    cfg = _build_run_config(args)
    summary = run_pipeline(cfg)
    for score in summary.strength_scores:
        print(
            f"{score.accent}: articulatory="
            f"{score.articulatory if score.articulatory is not None else 'n/a'} "
            f"acoustic={score.acoustic if score.acoustic is not None else 'n/a'} "
            f"levenshtein={score.levenshtein_mean if score.levenshtein_mean is not None else 'n/a'}"
        )
    return 2 if summary.n_skipped else 0


def _cmd_pitch(args) -> int:
    cfg = _build_run_config(args)
    summary = run_pipeline(cfg)
    for row in summary.pitch_rows:
        print(f"{row['l1']} {row['gender']}: {row['mean_pitch_hz']:.2f} Hz "
              f"({row['n_speakers']} speakers)")
    return 2 if summary.n_skipped else 0


def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = TV_CHANNELS if args.channels == len(TV_CHANNELS) else None
    rows = []
    for i in range(args.count):
        spec = SynthSpec(
            kind=args.kind,
            channels=args.channels,
            frames=args.frames,
            seed=args.seed + i,
            noise_ratio=args.noise_ratio,
        )
        series = gen_coordinated(spec)
        if names is not None:
            series = ChannelSeries(
                values=series.values, channel_names=names, frame_rate=series.frame_rate
            )
        utt_id = f"{args.prefix}_{i:03d}"
        path = out_dir / f"{utt_id}.csv"
        save_tv_series(path, series)
        rows.append(
            {
                "utterance_id": utt_id,
                "tv_path": str(path),
                "speaker_id": f"{args.prefix}_spk{i % 2}",
                "l1": args.l1,
                "gender": "M" if i % 2 == 0 else "F",
                "group": args.group,
                "prompt_id": f"p{i:03d}",
            }
        )
    if args.manifest:
        write_manifest(args.manifest, rows)
        print(f"wrote {args.count} fixtures and manifest {args.manifest}")
    else:
        print(f"wrote {args.count} fixtures into {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechcoord",
        description="Coordination-based analysis of accented speech corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("run", _cmd_run, "full pipeline: features, coordination, strength, pitch"),
        ("extract", _cmd_extract, "extract and cache acoustic features only"),
        ("coord", _cmd_coord, "coordination matrices and eigenspectra"),
        ("strength", _cmd_strength, "accent-strength table"),
        ("pitch", _cmd_pitch, "pitch statistics table"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("synth", help="generate synthetic coordination fixtures")
    p.add_argument("--kind", choices=sorted(KIND_NOISE_RATIOS), required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--channels", type=int, default=6)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-ratio", dest="noise_ratio", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--prefix", default="synth")
    p.add_argument("--manifest", help="also write a manifest CSV for the fixtures")
    p.add_argument("--group", choices=("native", "accent"), default="native")
    p.add_argument("--l1", default="English")
    p.set_defaults(fn=_cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ManifestError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
