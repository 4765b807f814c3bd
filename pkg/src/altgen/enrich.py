"""Metadata enrichment: language tags, accessibility metadata, title default.

Pure transform over a copy of the package document; never removes or
rewrites a well-formed existing value, so a second pass is a no-op.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from altgen.audit import is_well_formed_language_tag
from altgen.container import EpubArchive
from altgen.content import UnparseableDocument, document_text
from altgen.errors import AltgenError
from altgen.package import MetaEntry, MetaKind, PackageDocument, XHTML_MEDIA_TYPES

SAMPLE_DOCS = 5
SAMPLE_CHARS = 10_000


class FixReason(Enum):
    DETECTED = "Detected"
    DEFAULT = "Default"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class AppliedFix:
    """Skipped fixes always have new=None; the title default uses
    reason=Default, which is the warning-level variant (nothing was
    detected, a placeholder went in)."""

    field: str
    old: str | None
    new: str | None
    reason: FixReason

    def __post_init__(self) -> None:
        if self.reason is FixReason.SKIPPED and self.new is not None:
            raise ValueError("skipped fixes cannot carry a new value")

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "old": self.old,
            "new": self.new,
            "reason": self.reason.value,
        }


def sample_spine_text(pkg: PackageDocument, archive: EpubArchive) -> str:
    """Visible text of the first <= 5 spine documents, capped at 10 000
    characters. Unparseable documents are skipped."""
    parts: list[str] = []
    total = 0
    docs = 0
    for item in pkg.spine_items():
        if item.media_type not in XHTML_MEDIA_TYPES:
            continue
        entry = archive.entry(item.href)
        if entry is None:
            continue
        docs += 1
        if docs > SAMPLE_DOCS:
            break
        try:
            text = document_text(entry, limit=SAMPLE_CHARS - total)
        except UnparseableDocument:
            continue
        if text:
            parts.append(text)
            total += len(text) + 1
        if total >= SAMPLE_CHARS:
            break
    return " ".join(parts)[:SAMPLE_CHARS]


def enrich_metadata(
    pkg: PackageDocument,
    archive: EpubArchive,
    detector: Callable[[str], tuple[str, float]],
    *,
    fallback_title: str | None = None,
    include_alt_feature: bool = True,
) -> tuple[PackageDocument, list[AppliedFix]]:
    """Returns an enriched copy of pkg and the list of applied fixes.

    detector is detect_language-shaped: text -> (lang, confidence), raising
    on failure. fallback_title is the filename stem used when dc:title is
    missing. include_alt_feature adds accessibilityFeature=altText and
    should be set only when alt repair actually runs.
    """
    pkg = copy.deepcopy(pkg)
    fixes: list[AppliedFix] = []

    languages = pkg.values(MetaKind.DC_LANGUAGE)
    well_formed = [v for v in languages if is_well_formed_language_tag(v.strip())]
    ill_formed_present = len(well_formed) < len(languages)
    if not languages or ill_formed_present:
        detected: str | None = None
        try:
            detected, _confidence = detector(sample_spine_text(pkg, archive))
        except AltgenError:
            detected = None
        if detected is None:
            if not well_formed:
                fixes.append(AppliedFix("dc:language", None, None, FixReason.SKIPPED))
        else:
            if not languages:
                pkg.metadata.append(MetaEntry(MetaKind.DC_LANGUAGE, detected))
                fixes.append(
                    AppliedFix("dc:language", None, detected, FixReason.DETECTED)
                )
            else:
                for entry in pkg.metadata:
                    if entry.kind is MetaKind.DC_LANGUAGE and not is_well_formed_language_tag(
                        entry.value.strip()
                    ):
                        fixes.append(
                            AppliedFix(
                                "dc:language", entry.value, detected, FixReason.DETECTED
                            )
                        )
                        entry.value = detected

    if not pkg.accessibility_values("accessMode"):
        additions = [("accessMode", "textual"), ("accessMode", "visual")]
        if include_alt_feature:
            additions.append(("accessibilityFeature", "altText"))
        for prop, value in additions:
            pkg.metadata.append(
                MetaEntry(MetaKind.SCHEMA_ACCESSIBILITY, value, property=prop)
            )
            fixes.append(
                AppliedFix(f"schema:{prop}", None, value, FixReason.DEFAULT)
            )

    if not any(v.strip() for v in pkg.values(MetaKind.DC_TITLE)):
        if fallback_title:
            pkg.metadata.append(MetaEntry(MetaKind.DC_TITLE, fallback_title))
            fixes.append(
                AppliedFix("dc:title", None, fallback_title, FixReason.DEFAULT)
            )
        else:
            fixes.append(AppliedFix("dc:title", None, None, FixReason.SKIPPED))

    return pkg, fixes
