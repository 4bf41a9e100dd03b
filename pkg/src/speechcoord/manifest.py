"""Corpus manifests: one CSV row per utterance binding audio, trajectories,
annotations, and speaker metadata.

Structural problems (missing columns, duplicate IDs) abort the load; per-row
problems (dangling paths, missing fields) downgrade the row to a logged issue
so a corpus run can continue past individual bad records.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

MANIFEST_COLUMNS = (
    "utterance_id",
    "wav_path",
    "tv_path",
    "textgrid_path",
    "speaker_id",
    "l1",
    "gender",
    "group",
    "prompt_id",
)

NATIVE_L1 = "English"


class ManifestError(Exception):
    pass


class DuplicateId(ManifestError):
    def __init__(self, utterance_id: str):
        super().__init__(f"duplicate utterance_id {utterance_id!r}")


class MissingColumn(ManifestError):
    def __init__(self, names):
        super().__init__(f"manifest is missing columns: {', '.join(sorted(names))}")


class EmptyManifest(ManifestError):
    pass


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    wav_path: Path | None
    tv_path: Path | None
    textgrid_path: Path | None
    speaker_id: str
    l1: str
    gender: str
    group: str
    prompt_id: str | None


@dataclass(frozen=True)
class ManifestIssue:
    utterance_id: str
    reason: str
    fatal_for_record: bool


@dataclass
class Manifest:
    records: list[UtteranceRecord]
    issues: list[ManifestIssue]


def _clean(cell: str | None) -> str | None:
    if cell is None:
        return None
    cell = cell.strip()
    return cell or None


def load_manifest(path, base_dir: Path | None = None) -> Manifest:
    """Load and validate a manifest CSV.

    Relative file paths resolve against `base_dir` (default: the manifest's
    directory). Rows that cannot be used are recorded as issues and excluded
    from `records`; dangling paths produce warnings and drop just that path.
    """
    path = Path(path)
    if base_dir is None:
        base_dir = path.parent
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyManifest(f"{path} has no header row")
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise MissingColumn(missing)
        rows = list(reader)

    records: list[UtteranceRecord] = []
    issues: list[ManifestIssue] = []
    seen: set[str] = set()

    for row_idx, row in enumerate(rows):
        utt_id = _clean(row.get("utterance_id")) or f"<row {row_idx + 2}>"
        if utt_id in seen:
            raise DuplicateId(utt_id)
        seen.add(utt_id)

        def reject(reason: str) -> None:
            issues.append(ManifestIssue(utt_id, reason, fatal_for_record=True))

        speaker = _clean(row.get("speaker_id"))
        l1 = _clean(row.get("l1"))
        gender = _clean(row.get("gender"))
        group = _clean(row.get("group"))
        if not _clean(row.get("utterance_id")):
            reject("missing utterance_id")
            continue
        if not speaker or not l1:
            reject("missing speaker_id or l1")
            continue
        if gender not in ("M", "F"):
            reject(f"gender must be M or F, got {gender!r}")
            continue
        if group not in ("native", "accent"):
            reject(f"group must be native or accent, got {group!r}")
            continue
        if group == "accent" and l1 == NATIVE_L1:
            reject(f"accent-group record cannot have l1 == {NATIVE_L1!r}")
            continue

        paths: dict[str, Path | None] = {}
        for key in ("wav_path", "tv_path", "textgrid_path"):
            cell = _clean(row.get(key))
            if cell is None:
                paths[key] = None
                continue
            resolved = Path(cell)
            if not resolved.is_absolute():
                resolved = base_dir / resolved
            if not resolved.exists():
                issues.append(
                    ManifestIssue(utt_id, f"dangling {key}: {cell}", fatal_for_record=False)
                )
                paths[key] = None
            else:
                paths[key] = resolved

        if paths["wav_path"] is None and paths["tv_path"] is None:
            reject("record has neither a usable wav_path nor tv_path")
            continue

        records.append(
            UtteranceRecord(
                utterance_id=utt_id,
                wav_path=paths["wav_path"],
                tv_path=paths["tv_path"],
                textgrid_path=paths["textgrid_path"],
                speaker_id=speaker,
                l1=l1,
                gender=gender,
                group=group,
                prompt_id=_clean(row.get("prompt_id")),
            )
        )

    return Manifest(records=records, issues=issues)


def write_manifest(path, rows: list[dict]) -> None:
    """Write manifest rows (dicts keyed by MANIFEST_COLUMNS) as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") or "" for k in MANIFEST_COLUMNS})
