"""Coordination-based analysis of accented speech.

Quantifies speech-coordination complexity and foreign-accent strength from
acoustic (MFCC, pitch) and articulatory (vocal-tract-variable) channel
signals: channel-delay correlation matrices, their eigenspectra, matrix-norm
accent scores, pitch statistics, and a phone-level edit-distance baseline.
"""

from .accent_strength import StrengthScore, group_mean_matrix, rank_accents, strength_score
from .acoustic_features import (
    MfccConfig,
    PitchConfig,
    PitchTrack,
    mean_pitch,
    mfcc,
    pyin_pitch,
)
from .articulatory_io import (
    ChannelSeries,
    ValidationReport,
    load_tv_series,
    save_tv_series,
    validate_series,
)
from .audio_io import AudioBuffer, load_wav, resample, write_wav
from .coordination import (
    CoordConfig,
    Eigenspectrum,
    StackedCoordMatrix,
    average_spectra,
    build_stacked_matrix,
    delayed_correlation,
    difference_spectrum,
    eigenspectrum,
    z_score,
)
from .manifest import Manifest, UtteranceRecord, load_manifest
from .pipeline import RunConfig, RunSummary, emit_reports, run_pipeline
from .synth import SynthSpec, effective_rank, gen_coordinated
from .transcription import (
    PhonePair,
    TextGrid,
    accent_levenshtein,
    extract_phone_pair,
    levenshtein,
    parse_textgrid,
    read_textgrid,
    serialize_textgrid,
)

__version__ = "0.1.0"
