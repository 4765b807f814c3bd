"""Structural integrity checking and final assembly of a repaired EPUB."""

from __future__ import annotations

import os
import posixpath
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from xml.etree import ElementTree as ET

from altgen.container import (
    ArchiveEntry,
    Compression,
    EpubArchive,
    MIMETYPE_CONTENT,
    MIMETYPE_PATH,
    write_epub,
)
from altgen.errors import AltgenError
from altgen.package import (
    PackageDocument,
    XHTML_MEDIA_TYPES,
    has_scheme,
    parse_opf,
    serialize_opf,
)

_CONTENT_EXTENSIONS = frozenset(
    {".xhtml", ".html", ".htm", ".png", ".jpg", ".jpeg", ".gif", ".svg", ".webp"}
)


class IntegrityErrors(AltgenError):
    """rebuild refused to run because Error-severity findings exist."""

    def __init__(self, findings: list["IntegrityFinding"]):
        self.findings = findings
        super().__init__(
            "; ".join(f"{f.code.value}: {f.path}" for f in findings) or "integrity errors"
        )


class FindingSeverity(Enum):
    ERROR = "Error"
    WARNING = "Warning"


class FindingCode(Enum):
    MANIFEST_DANGLING_HREF = "ManifestDanglingHref"
    SPINE_DANGLING_IDREF = "SpineDanglingIdref"
    UNMANIFESTED_CONTENT = "UnmanifestedContent"
    MIMETYPE_VIOLATION = "MimetypeViolation"
    MALFORMED_MODIFIED_DOC = "MalformedModifiedDoc"


# UnmanifestedContent is deliberately the only Warning-severity code.
_SEVERITY_BY_CODE = {
    FindingCode.MANIFEST_DANGLING_HREF: FindingSeverity.ERROR,
    FindingCode.SPINE_DANGLING_IDREF: FindingSeverity.ERROR,
    FindingCode.UNMANIFESTED_CONTENT: FindingSeverity.WARNING,
    FindingCode.MIMETYPE_VIOLATION: FindingSeverity.ERROR,
    FindingCode.MALFORMED_MODIFIED_DOC: FindingSeverity.ERROR,
}


@dataclass(frozen=True)
class IntegrityFinding:
    code: FindingCode
    severity: FindingSeverity
    path: str

    def to_dict(self) -> dict:
        return {"code": self.code.value, "severity": self.severity.value, "path": self.path}


def _finding(code: FindingCode, path: str) -> IntegrityFinding:
    return IntegrityFinding(code, _SEVERITY_BY_CODE[code], path)


def integrity_check(archive: EpubArchive, pkg: PackageDocument) -> list[IntegrityFinding]:
    """Structural findings; never raises. Deterministic order."""
    findings: list[IntegrityFinding] = []

    manifest_hrefs = set()
    for item in pkg.manifest:
        manifest_hrefs.add(item.href)
        if not has_scheme(item.href) and archive.entry(item.href) is None:
            findings.append(_finding(FindingCode.MANIFEST_DANGLING_HREF, item.href))

    ids = {item.id for item in pkg.manifest}
    for idref in pkg.spine:
        if idref not in ids:
            findings.append(_finding(FindingCode.SPINE_DANGLING_IDREF, idref))

    opf_path = archive.rootfile_path
    for entry in archive.entries:
        if entry.path in (MIMETYPE_PATH, opf_path) or entry.path.startswith("META-INF/"):
            continue
        if entry.path.endswith("/"):
            continue
        ext = posixpath.splitext(entry.path)[1].lower()
        if ext in _CONTENT_EXTENSIONS and entry.path not in manifest_hrefs:
            findings.append(_finding(FindingCode.UNMANIFESTED_CONTENT, entry.path))

    first = archive.entries[0] if archive.entries else None
    if (
        first is None
        or first.path != MIMETYPE_PATH
        or first.compression is not Compression.STORED
        or first.data != MIMETYPE_CONTENT
    ):
        findings.append(_finding(FindingCode.MIMETYPE_VIOLATION, MIMETYPE_PATH))

    xhtml_hrefs = {i.href for i in pkg.manifest if i.media_type in XHTML_MEDIA_TYPES}
    for entry in archive.entries:
        if not entry.modified:
            continue
        ext = posixpath.splitext(entry.path)[1].lower()
        if entry.path in xhtml_hrefs or ext in (".xhtml", ".html", ".htm"):
            try:
                ET.fromstring(entry.data)
            except ET.ParseError:
                findings.append(_finding(FindingCode.MALFORMED_MODIFIED_DOC, entry.path))

    findings.sort(key=lambda f: (f.path, f.code.value))
    return findings


def rebuild(
    archive: EpubArchive,
    pkg: PackageDocument,
    modified_docs: list[ArchiveEntry] | None = None,
) -> bytes:
    """Assemble output bytes: swap in modified docs, re-serialize the OPF
    only if the model changed, check integrity, write.

    Raises IntegrityErrors when Error-severity findings exist, KeyError for
    a modified doc whose path is not in the archive.
    """
    result = archive.copy()
    for doc in modified_docs or ():
        result.replace_entry(doc)

    opf_entry = result.entry(result.rootfile_path)
    if opf_entry is None:
        raise IntegrityErrors(
            [_finding(FindingCode.MANIFEST_DANGLING_HREF, result.rootfile_path)]
        )
    replace_opf = True
    try:
        current = parse_opf(opf_entry)
        replace_opf = current != pkg
    except AltgenError:
        replace_opf = True
    if replace_opf:
        result.replace_entry(opf_entry.with_data(serialize_opf(pkg)))

    findings = integrity_check(result, pkg)
    errors = [f for f in findings if f.severity is FindingSeverity.ERROR]
    if errors:
        raise IntegrityErrors(errors)
    return write_epub(result)


def write_file_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        # mkstemp creates 0600; restore ordinary create permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp_name, 0o666 & ~umask)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
