"""Accent-strength scores from coordination matrices.

A group of accented utterances is compared against a native reference by
differencing their coordination matrices and taking a matrix norm of the
averaged difference: either per shared prompt (paired mode, the default when
prompt IDs line up) or between the two group means. Larger norms mean the
group's coordination structure sits further from the native reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coordination import ShapeMismatch, StackedCoordMatrix

NORMS = ("frobenius", "spectral", "entrywise_l1")
MODES = ("paired", "group_mean")


class StrengthError(Exception):
    pass


class EmptyGroup(StrengthError):
    pass


class PairingIncomplete(StrengthError):
    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(sorted(missing))
        super().__init__(
            f"accent prompts with no native counterpart: {', '.join(self.missing)}"
        )


class MissingKey(StrengthError):
    pass


@dataclass(frozen=True)
class StrengthScore:
    accent: str
    articulatory: float | None
    acoustic: float | None
    levenshtein_mean: float | None
    n_utterances: int


def _as_stack(m) -> np.ndarray:
    if isinstance(m, StackedCoordMatrix):
        return m.stacked
    return np.asarray(m, dtype=np.float64)


def _check_shapes(stacks: Sequence[np.ndarray]) -> None:
    shapes = {s.shape for s in stacks}
    if len(shapes) > 1:
        raise ShapeMismatch(f"matrices have mixed shapes: {sorted(shapes)}")


def matrix_norm(stacked: np.ndarray, norm: str = "frobenius") -> float:
    if norm == "frobenius":
        return float(np.sqrt(np.sum(stacked**2)))
    if norm == "spectral":
        return float(np.linalg.norm(stacked, 2))
    if norm == "entrywise_l1":
        return float(np.sum(np.abs(stacked)))
    raise ValueError(f"unknown norm {norm!r}; pick one of {NORMS}")


def group_mean_matrix(mats: Sequence[StackedCoordMatrix]) -> StackedCoordMatrix:
    """Entry-wise mean of coordination matrices sharing one layout."""
    if not mats:
        raise EmptyGroup("cannot average an empty matrix list")
    layout = mats[0].layout()
    for m in mats[1:]:
        if m.layout() != layout:
            raise ShapeMismatch(f"matrix layout {m.layout()} differs from {layout}")
    per_scale = tuple(
        np.mean([m.per_scale[w] for m in mats], axis=0) for w in range(len(layout[2]))
    )
    return StackedCoordMatrix(
        per_scale=per_scale,
        stacked=np.vstack(per_scale),
        num_channels=mats[0].num_channels,
        delays_per_scale=mats[0].delays_per_scale,
        scales=mats[0].scales,
    )


def strength_score(
    accent_mats: Sequence,
    native_mats: Sequence,
    mode: str = "paired",
    accent_prompts: Sequence[str] | None = None,
    native_prompts: Sequence[str] | None = None,
    norm: str = "frobenius",
) -> float:
    """Norm of the averaged difference between accent and native matrices.

    paired mode averages per-prompt differences (mean accent matrix minus
    mean native matrix for each prompt appearing in the accent group);
    group_mean differences the two group means directly. The two agree under
    complete one-to-one pairing.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; pick one of {MODES}")
    if not accent_mats or not native_mats:
        raise EmptyGroup("both accent and native groups must be non-empty")
    accents = [_as_stack(m) for m in accent_mats]
    natives = [_as_stack(m) for m in native_mats]
    _check_shapes(accents + natives)

    if mode == "group_mean":
        diff = np.mean(accents, axis=0) - np.mean(natives, axis=0)
        return matrix_norm(diff, norm)

    if accent_prompts is None or native_prompts is None:
        raise PairingIncomplete(["<no prompt ids supplied>"])
    if len(accent_prompts) != len(accents) or len(native_prompts) != len(natives):
        raise ShapeMismatch("prompt lists must align with matrix lists")
    native_by_prompt: dict[str, list[np.ndarray]] = {}
    for prompt, m in zip(native_prompts, natives):
        native_by_prompt.setdefault(prompt, []).append(m)
    accent_by_prompt: dict[str, list[np.ndarray]] = {}
    for prompt, m in zip(accent_prompts, accents):
        accent_by_prompt.setdefault(prompt, []).append(m)
    missing = sorted(set(accent_by_prompt) - set(native_by_prompt))
    if missing:
        raise PairingIncomplete(missing)

    diffs = [
        np.mean(accent_by_prompt[prompt], axis=0)
        - np.mean(native_by_prompt[prompt], axis=0)
        for prompt in sorted(accent_by_prompt)
    ]
    return matrix_norm(np.mean(diffs, axis=0), norm)


def rank_accents(scores: Sequence[StrengthScore], key: str) -> list[str]:
    """Accent labels ordered by ascending score; ties break lexicographically."""
    field = {
        "articulatory": lambda s: s.articulatory,
        "acoustic": lambda s: s.acoustic,
        "levenshtein": lambda s: s.levenshtein_mean,
    }.get(key)
    if field is None:
        raise ValueError(f"unknown ranking key {key!r}")
    for s in scores:
        if field(s) is None:
            raise MissingKey(f"score for {s.accent!r} has no {key} value")
    return [s.accent for s in sorted(scores, key=lambda s: (field(s), s.accent))]
