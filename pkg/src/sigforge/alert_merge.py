"""Merge alerts of the original rules with alerts of the generalised rules.

A generalised alert is kept only when no original alert was raised for the
same packet; everything the original rules found passes through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .alert_io import format_alerts

MERGED_SUFFIX = ".merged"
FUZZ_SUFFIX = ".fuzz"
REJECTED_SUFFIX = ".rejected_fuzz"


@dataclass
class MergeResult:
    merged: list = field(default_factory=list)
    fuzz: list = field(default_factory=list)
    rejected_fuzz: list = field(default_factory=list)


def merge(original, generalised) -> MergeResult:
    original = list(original)
    generalised = list(generalised)
    taken = {a.key for a in original}
    result = MergeResult()
    for a in generalised:
        (result.rejected_fuzz if a.key in taken else result.fuzz).append(a)
    # Stable sort: ties keep original-before-generalised, then input order.
    tagged = [(a.ts, 0, i, a) for i, a in enumerate(original)]
    tagged += [(a.ts, 1, i, a) for i, a in enumerate(result.fuzz)]
    tagged.sort(key=lambda t: t[:3])
    result.merged = [t[3] for t in tagged]
    return result


def output_paths(generalised_path) -> dict[str, Path]:
    p = str(generalised_path)
    return {
        "merged": Path(p + MERGED_SUFFIX),
        "fuzz": Path(p + FUZZ_SUFFIX),
        "rejected_fuzz": Path(p + REJECTED_SUFFIX),
    }


def write_merge(result: MergeResult, generalised_path) -> dict[str, Path]:
    paths = output_paths(generalised_path)
    for name, path in paths.items():
        path.write_text(format_alerts(getattr(result, name)), encoding="utf-8")
    return paths
