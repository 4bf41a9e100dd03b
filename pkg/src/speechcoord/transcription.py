"""Praat TextGrid parsing and phone-sequence edit distances.

Annotated corpora mark mispronunciations inside interval labels as
"produced, canonical, tag" with tag s (substitution), d (deletion), or
a (addition). This module parses long-form TextGrids, splits such tiers into
canonical vs perceived phone sequences, and scores them with plain
unit-cost Levenshtein distance.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

SILENCE_LABELS = frozenset({"", "sil", "sp", "spn"})
DEFAULT_TIER = "phones"


class TranscriptionError(Exception):
    pass


class TextGridSyntaxError(TranscriptionError):
    def __init__(self, line: int, expected: str):
        self.line = line
        self.expected = expected
        super().__init__(f"line {line}: expected {expected}")


class TierNotFound(TranscriptionError):
    def __init__(self, name: str, available):
        super().__init__(f"tier {name!r} not found; file has {sorted(available)}")


class MalformedTag(TranscriptionError):
    def __init__(self, index: int, label: str):
        self.index = index
        super().__init__(f"interval {index}: cannot parse error tag in {label!r}")


class EmptyGroup(TranscriptionError):
    pass


class UnsupportedTierWarning(UserWarning):
    pass


class Interval(NamedTuple):
    xmin: float
    xmax: float
    label: str


class Tier(NamedTuple):
    name: str
    intervals: tuple[Interval, ...]


@dataclass(frozen=True)
class TextGrid:
    xmin: float
    xmax: float
    tiers: tuple[Tier, ...]

    def tier(self, name: str) -> Tier:
        for t in self.tiers:
            if t.name == name:
                return t
        raise TierNotFound(name, [t.name for t in self.tiers])


@dataclass(frozen=True)
class PhonePair:
    canonical: tuple[str, ...]
    perceived: tuple[str, ...]
    error_counts: tuple[int, int, int]  # substitutions, deletions, additions


_NUM_RE = re.compile(r"=\s*(-?[\d.eE+-]+)\s*$")
_STR_RE = re.compile(r'=\s*"(.*)"\s*$')


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next_content(self) -> tuple[int, str]:
        while self.pos < len(self.lines):
            self.pos += 1
            line = self.lines[self.pos - 1].strip()
            if line:
                return self.pos, line
        return len(self.lines) + 1, ""

    def expect_number(self, key: str) -> float:
        lineno, line = self.next_content()
        if not line.startswith(key):
            raise TextGridSyntaxError(lineno, f"'{key} = <number>'")
        m = _NUM_RE.search(line)
        if not m:
            raise TextGridSyntaxError(lineno, f"numeric value for {key}")
        return float(m.group(1))

    def expect_string(self, key: str) -> str:
        lineno, line = self.next_content()
        if not line.startswith(key):
            raise TextGridSyntaxError(lineno, f"'{key} = \"...\"'")
        m = _STR_RE.search(line)
        if m is None:
            raise TextGridSyntaxError(lineno, f"quoted value for {key}")
        return m.group(1).replace('""', '"')

    def expect_literal(self, prefix: str) -> str:
        lineno, line = self.next_content()
        if not line.startswith(prefix):
            raise TextGridSyntaxError(lineno, repr(prefix))
        return line


def parse_textgrid(text: str) -> TextGrid:
    """Parse a long-form ("ooTextFile") TextGrid from its text content.

    Interval tiers are retained; point tiers are skipped with a warning.
    Doubled quotes inside labels collapse to a single quote.
    """
    src = _Lines(text)
    if src.expect_string("File type") != "ooTextFile":
        raise TextGridSyntaxError(1, 'File type = "ooTextFile"')
    if src.expect_string("Object class") != "TextGrid":
        raise TextGridSyntaxError(2, 'Object class = "TextGrid"')
    grid_xmin = src.expect_number("xmin")
    grid_xmax = src.expect_number("xmax")
    src.expect_literal("tiers?")
    n_tiers = int(src.expect_number("size"))
    src.expect_literal("item")

    tiers: list[Tier] = []
    for _ in range(n_tiers):
        src.expect_literal("item")
        tier_class = src.expect_string("class")
        name = src.expect_string("name")
        src.expect_number("xmin")
        src.expect_number("xmax")

        if tier_class == "IntervalTier":
            count_line = src.expect_number("intervals: size")
            intervals = []
            prev_end = None
            for _ in range(int(count_line)):
                src.expect_literal("intervals")
                xmin = src.expect_number("xmin")
                xmax = src.expect_number("xmax")
                label = src.expect_string("text")
                if xmax <= xmin:
                    raise TextGridSyntaxError(src.pos, "interval with xmin < xmax")
                if prev_end is not None and xmin < prev_end - 1e-9:
                    raise TextGridSyntaxError(src.pos, "non-overlapping ordered intervals")
                prev_end = xmax
                intervals.append(Interval(xmin, xmax, label))
            tiers.append(Tier(name, tuple(intervals)))
        elif tier_class in ("TextTier", "PointTier"):
            warnings.warn(
                f"skipping point tier {name!r}", UnsupportedTierWarning, stacklevel=2
            )
            n_points = int(src.expect_number("points: size"))
            for _ in range(n_points):
                src.expect_literal("points")
                src.expect_number("number")
                src.expect_string("mark")
        else:
            raise TextGridSyntaxError(src.pos, f"known tier class, got {tier_class!r}")

    return TextGrid(xmin=grid_xmin, xmax=grid_xmax, tiers=tuple(tiers))


def read_textgrid(path) -> TextGrid:
    """Read a TextGrid file, sniffing UTF-8 vs UTF-16 from the BOM."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw.startswith(b"\xff\xfe") or raw.startswith(b"\xfe\xff"):
        text = raw.decode("utf-16")
    elif raw.startswith(b"\xef\xbb\xbf"):
        text = raw.decode("utf-8-sig")
    else:
        text = raw.decode("utf-8")
    return parse_textgrid(text)


def serialize_textgrid(grid: TextGrid) -> str:
    """Long-form text for a TextGrid; parse(serialize(g)) round-trips."""
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {float(grid.xmin)!r}",
        f"xmax = {float(grid.xmax)!r}",
        "tiers? <exists>",
        f"size = {len(grid.tiers)}",
        "item []:",
    ]
    for t_idx, tier in enumerate(grid.tiers, start=1):
        out.append(f"    item [{t_idx}]:")
        out.append('        class = "IntervalTier"')
        out.append(f'        name = "{tier.name.replace(chr(34), chr(34) * 2)}"')
        tier_xmin = tier.intervals[0].xmin if tier.intervals else grid.xmin
        tier_xmax = tier.intervals[-1].xmax if tier.intervals else grid.xmax
        out.append(f"        xmin = {float(tier_xmin)!r}")
        out.append(f"        xmax = {float(tier_xmax)!r}")
        out.append(f"        intervals: size = {len(tier.intervals)}")
        for i_idx, iv in enumerate(tier.intervals, start=1):
            out.append(f"        intervals [{i_idx}]:")
            out.append(f"            xmin = {float(iv.xmin)!r}")
            out.append(f"            xmax = {float(iv.xmax)!r}")
            escaped = iv.label.replace('"', '""')
            out.append(f'            text = "{escaped}"')
    return "\n".join(out) + "\n"


def extract_phone_pair(grid: TextGrid, tier_name: str = DEFAULT_TIER) -> PhonePair:
    """Split a phone tier into canonical and perceived sequences.

    Untagged labels feed both sequences. "produced, canonical, tag" labels
    apply per tag: s puts produced into perceived and canonical into
    canonical; d keeps the canonical phone only; a keeps the produced phone
    only. Silence labels ("", sil, sp, spn) never enter either sequence.
    """
    tier = grid.tier(tier_name)
    canonical: list[str] = []
    perceived: list[str] = []
    subs = dels = adds = 0
    for index, interval in enumerate(tier.intervals):
        label = interval.label.strip()
        if label.lower() in SILENCE_LABELS:
            continue
        if "," not in label:
            canonical.append(label)
            perceived.append(label)
            continue
        parts = [p.strip() for p in label.split(",")]
        if len(parts) != 3:
            raise MalformedTag(index, interval.label)
        produced, canon, tag = parts[0], parts[1], parts[2].lower()
        if tag == "s":
            subs += 1
            if canon.lower() not in SILENCE_LABELS:
                canonical.append(canon)
            if produced.lower() not in SILENCE_LABELS:
                perceived.append(produced)
        elif tag == "d":
            dels += 1
            if canon.lower() not in SILENCE_LABELS:
                canonical.append(canon)
        elif tag == "a":
            adds += 1
            if produced.lower() not in SILENCE_LABELS:
                perceived.append(produced)
        else:
            raise MalformedTag(index, interval.label)
    return PhonePair(
        canonical=tuple(canonical),
        perceived=tuple(perceived),
        error_counts=(subs, dels, adds),
    )


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between label sequences, O(min(|a|,|b|)) memory."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        curr = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            curr[j] = min(
                prev[j] + 1,  # delete x
                curr[j - 1] + 1,  # insert y
                prev[j - 1] + (x != y),  # substitute
            )
        prev = curr
    return prev[-1]


class LevenshteinSummary(NamedTuple):
    mean: float
    normalized_mean: float
    n_utterances: int


def accent_levenshtein(pairs: Sequence[PhonePair]) -> LevenshteinSummary:
    """Mean edit distance between canonical and perceived sequences.

    The primary statistic is the unnormalized per-utterance mean; the
    length-normalized mean (distance / canonical length, over pairs with a
    non-empty canonical sequence) is reported alongside.
    """
    if not pairs:
        raise EmptyGroup("no annotated utterances to score")
    distances = [levenshtein(p.canonical, p.perceived) for p in pairs]
    ratios = [
        d / len(p.canonical) for d, p in zip(distances, pairs) if p.canonical
    ]
    return LevenshteinSummary(
        mean=sum(distances) / len(distances),
        normalized_mean=sum(ratios) / len(ratios) if ratios else 0.0,
        n_utterances=len(pairs),
    )
