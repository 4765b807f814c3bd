"""Locate images in XHTML content documents, pull surrounding context, and
splice alt attributes back in without disturbing the rest of the file.

Parsing is strict XML first, lenient HTML second; alt writes operate on the
source text (not a re-serialized DOM) so untouched markup keeps its bytes.
"""

from __future__ import annotations

import codecs
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from xml.etree import ElementTree as ET
from xml.sax.saxutils import escape

from altgen.container import ArchiveEntry
from altgen.errors import AltgenError
from altgen.package import MetaKind, PackageDocument, resolve_href

BLOCK_TAGS = frozenset({"p", "div", "li", "td", "blockquote", "figcaption"})
HEADING_TAGS = frozenset({"h1", "h2", "h3", "h4", "h5", "h6"})
_IMAGE_TAGS = ("img", "image")
_NO_TEXT_TAGS = frozenset({"script", "style"})

CONTEXT_WINDOW = 500


class DocumentError(AltgenError):
    pass


class UnparseableDocument(DocumentError):
    """Document could not be decoded or parsed even leniently."""


class StaleOccurrence(DocumentError):
    """Occurrence index no longer matches the document."""


class RewriteFailed(DocumentError):
    """Post-write verification found a disagreement; the write was aborted."""


@dataclass(frozen=True)
class ImageOccurrence:
    doc_path: str
    element_index: int
    src: str
    existing_alt: str | None
    decorative: bool


@dataclass(frozen=True)
class ContextBundle:
    figcaption: str | None = None
    preceding_text: str = ""
    following_text: str = ""
    nearest_heading: str | None = None
    doc_title: str | None = None


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _localname(tag: str) -> str:
    if tag.startswith("{"):
        return tag.rsplit("}", 1)[1]
    return tag.rsplit(":", 1)[-1]


def _attr_by_localname(elem: ET.Element, name: str) -> str | None:
    if name in elem.attrib:
        return elem.attrib[name]
    for key, value in elem.attrib.items():
        if _localname(key) == name:
            return value
    return None


_VOID_TAGS = frozenset(
    {
        "area", "base", "br", "col", "embed", "hr", "img", "image",
        "input", "link", "meta", "param", "source", "track", "wbr",
    }
)


class _LenientBuilder(HTMLParser):
    """Builds an ElementTree from tag soup; mismatched end tags are dropped,
    void elements never stay open."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = ET.Element("#document")
        self._stack = [self.root]

    @staticmethod
    def _attr_dict(attrs: list[tuple[str, str | None]]) -> dict[str, str]:
        out: dict[str, str] = {}
        for key, value in attrs:
            out.setdefault(key, value if value is not None else "")
        return out

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        elem = ET.SubElement(self._stack[-1], tag, self._attr_dict(attrs))
        if tag not in _VOID_TAGS:
            self._stack.append(elem)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        ET.SubElement(self._stack[-1], tag, self._attr_dict(attrs))

    def handle_endtag(self, tag: str) -> None:
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                return

    def handle_data(self, data: str) -> None:
        current = self._stack[-1]
        if len(current):
            last = current[-1]
            last.tail = (last.tail or "") + data
        else:
            current.text = (current.text or "") + data


_ENCODING_RE = re.compile(
    rb'<\?xml[^>]*encoding\s*=\s*["\']([A-Za-z0-9._-]+)["\']', re.DOTALL
)
_CHARSET_RE = re.compile(rb'charset\s*=\s*["\']?([A-Za-z0-9._-]+)', re.IGNORECASE)


def decode_document(data: bytes) -> str:
    """Decode content-document bytes using BOM, XML declaration, or meta
    charset, defaulting to UTF-8. Raises UnparseableDocument on failure."""
    if data.startswith(codecs.BOM_UTF8):
        encoding, data = "utf-8", data[len(codecs.BOM_UTF8) :]
    elif data.startswith(codecs.BOM_UTF16_LE) or data.startswith(codecs.BOM_UTF16_BE):
        encoding = "utf-16"
    else:
        head = data[:1024]
        match = _ENCODING_RE.search(head) or _CHARSET_RE.search(head)
        encoding = match.group(1).decode("ascii", "replace") if match else "utf-8"
    try:
        return data.decode(encoding)
    except (UnicodeDecodeError, LookupError) as exc:
        raise UnparseableDocument(str(exc)) from exc


def parse_document(data: bytes) -> ET.Element:
    """Parse strict XML, falling back to lenient HTML. Returns a synthetic
    '#document' wrapper element. Raises UnparseableDocument."""
    text = decode_document(data)
    try:
        root = ET.fromstring(data)
        wrapper = ET.Element("#document")
        wrapper.append(root)
        return wrapper
    except ET.ParseError:
        pass
    builder = _LenientBuilder()
    try:
        builder.feed(text)
        builder.close()
    except Exception as exc:  # HTMLParser rarely raises, but never crash here
        raise UnparseableDocument(str(exc)) from exc
    return builder.root


def _iter_image_elements(root: ET.Element) -> list[ET.Element]:
    out = []
    for elem in root.iter():
        if isinstance(elem.tag, str) and _localname(elem.tag) in _IMAGE_TAGS:
            out.append(elem)
    return out


def _is_decorative(elem: ET.Element) -> bool:
    role = _attr_by_localname(elem, "role") or ""
    return any(token in ("presentation", "none") for token in role.split())


def find_images(doc: ArchiveEntry, doc_path: str | None = None) -> list[ImageOccurrence]:
    """Every img and SVG image element in document order.

    src is resolved against the document's directory (absolute URLs kept
    verbatim). Raises UnparseableDocument.
    """
    if doc_path is None:
        doc_path = doc.path
    root = parse_document(doc.data)
    base_dir = doc_path.rsplit("/", 1)[0] if "/" in doc_path else ""
    occurrences = []
    for index, elem in enumerate(_iter_image_elements(root)):
        if _localname(elem.tag) == "img":
            src = elem.get("src", "")
        else:
            src = _attr_by_localname(elem, "href") or ""
        occurrences.append(
            ImageOccurrence(
                doc_path=doc_path,
                element_index=index,
                src=resolve_href(base_dir, src) if src else "",
                existing_alt=_attr_by_localname(elem, "alt"),
                decorative=_is_decorative(elem),
            )
        )
    return occurrences


def _text_of(elem: ET.Element) -> str:
    return normalize_ws("".join(elem.itertext()))


def _tail_window(parts: list[str], limit: int = CONTEXT_WINDOW) -> str:
    text = normalize_ws(" ".join(parts))
    if len(text) <= limit:
        return text
    cut = text[-limit:]
    space = cut.find(" ")
    if 0 <= space < len(cut) - 1:
        cut = cut[space + 1 :]
    return cut


def _head_window(parts: list[str], limit: int = CONTEXT_WINDOW) -> str:
    text = normalize_ws(" ".join(parts))
    if len(text) <= limit:
        return text
    cut = text[:limit]
    space = cut.rfind(" ")
    if space > 0:
        cut = cut[:space]
    return cut


def extract_context(
    doc: ArchiveEntry, occurrence: ImageOccurrence, pkg: PackageDocument
) -> ContextBundle:
    """Context around one image: enclosing figcaption, block text before and
    after (500-char windows), nearest preceding heading, package title.

    Raises StaleOccurrence when the index no longer exists, and
    UnparseableDocument.
    """
    root = parse_document(doc.data)
    images = _iter_image_elements(root)
    if occurrence.element_index >= len(images):
        raise StaleOccurrence(
            f"{occurrence.doc_path}: image index {occurrence.element_index} out of range"
        )
    target = images[occurrence.element_index]

    parents: dict[ET.Element, ET.Element] = {}
    for parent in root.iter():
        for child in parent:
            parents[child] = parent

    figcaption_elem = None
    node = target
    while node in parents:
        node = parents[node]
        if isinstance(node.tag, str) and _localname(node.tag) == "figure":
            for descendant in node.iter():
                if isinstance(descendant.tag, str) and _localname(descendant.tag) == "figcaption":
                    figcaption_elem = descendant
                    break
            break

    pre_parts: list[str] = []
    post_parts: list[str] = []
    state = {"seen": False, "heading": None}

    def walk(elem: ET.Element, depth: int) -> None:
        if elem is target:
            state["seen"] = True
            return
        if elem is figcaption_elem:
            return
        if not isinstance(elem.tag, str):
            return
        local = _localname(elem.tag)
        if local in _NO_TEXT_TAGS:
            return
        if local in HEADING_TAGS:
            # headings are captured separately, not mixed into context text
            if not state["seen"]:
                text = _text_of(elem)
                if text:
                    state["heading"] = text
            return
        inside = depth + (1 if local in BLOCK_TAGS else 0)
        bucket = post_parts if state["seen"] else pre_parts
        if elem.text and inside > 0:
            bucket.append(elem.text)
        for child in elem:
            walk(child, inside)
            bucket = post_parts if state["seen"] else pre_parts
            if child.tail and inside > 0:
                bucket.append(child.tail)

    walk(root, 0)

    figcaption = _text_of(figcaption_elem) if figcaption_elem is not None else None
    title = pkg.first_value(MetaKind.DC_TITLE) if pkg is not None else None
    title = normalize_ws(title) if title else None
    return ContextBundle(
        figcaption=figcaption or None,
        preceding_text=_tail_window(pre_parts),
        following_text=_head_window(post_parts),
        nearest_heading=state["heading"],
        doc_title=title,
    )


def document_text(doc: ArchiveEntry, limit: int | None = None) -> str:
    """Whole-document visible text, whitespace-normalized; script/style
    content excluded. Raises UnparseableDocument."""
    root = parse_document(doc.data)
    parts: list[str] = []
    total = 0

    def walk(elem: ET.Element) -> bool:
        nonlocal total
        if not isinstance(elem.tag, str) or _localname(elem.tag) in _NO_TEXT_TAGS:
            return True
        if elem.text:
            parts.append(elem.text)
            total += len(elem.text)
        for child in elem:
            if not walk(child):
                return False
            if child.tail:
                parts.append(child.tail)
                total += len(child.tail)
            if limit is not None and total > limit * 2:
                return False
        return True

    walk(root)
    text = normalize_ws(" ".join(parts))
    if limit is not None:
        text = text[:limit]
    return text


# --- alt attribute splicing over raw source text ---

_TAG_NAME_RE = re.compile(r"<([A-Za-z][^\s/>]*)")
_ATTR_RE = re.compile(
    r"""([^\s=/>"']+)(\s*=\s*("[^"]*"|'[^']*'|[^\s>]*))?"""
)


def _iter_start_tags(text: str):
    """Yields (name, start, end) for each start tag; end is the index of '>'.
    Comments, CDATA, doctypes, processing instructions, and end tags skipped."""
    i, n = 0, len(text)
    while i < n:
        lt = text.find("<", i)
        if lt < 0:
            return
        if text.startswith("<!--", lt):
            close = text.find("-->", lt + 4)
            i = n if close < 0 else close + 3
            continue
        if text.startswith("<![CDATA[", lt):
            close = text.find("]]>", lt + 9)
            i = n if close < 0 else close + 3
            continue
        if text.startswith("<!", lt) or text.startswith("</", lt):
            close = text.find(">", lt + 2)
            i = n if close < 0 else close + 1
            continue
        if text.startswith("<?", lt):
            close = text.find("?>", lt + 2)
            i = n if close < 0 else close + 2
            continue
        match = _TAG_NAME_RE.match(text, lt)
        if not match:
            i = lt + 1
            continue
        j = match.end()
        quote = None
        end = -1
        while j < n:
            ch = text[j]
            if quote:
                if ch == quote:
                    quote = None
            elif ch in ('"', "'"):
                quote = ch
            elif ch == ">":
                end = j
                break
            j += 1
        if end < 0:
            return
        yield match.group(1), lt, end
        i = end + 1


def _escape_attr_value(value: str) -> str:
    return escape(value, {'"': "&quot;"})


def _splice_alt(text: str, tag_start: int, tag_end: int, alt: str) -> str:
    """Rewrite or insert the alt attribute inside one start tag's text span."""
    name_end = _TAG_NAME_RE.match(text, tag_start).end()
    body_start, body_end = name_end, tag_end
    if text[body_end - 1] == "/":
        body_end -= 1
    body = text[body_start:body_end]
    escaped = _escape_attr_value(alt)
    replacement = f'alt="{escaped}"'
    for match in _ATTR_RE.finditer(body):
        if match.group(1).lower() != "alt":
            continue
        new_body = body[: match.start()] + replacement + body[match.end() :]
        return text[:body_start] + new_body + text[body_end:]
    if body and body[-1].isspace():
        new_body = body + replacement
    else:
        new_body = body + " " + replacement
    return text[:body_start] + new_body + text[body_end:]


def set_alt_text(doc: ArchiveEntry, occurrence: ImageOccurrence, alt: str) -> ArchiveEntry:
    """Set the alt attribute on exactly the occurrence's element, splicing
    the source text so every other byte's semantics survive.

    Returns a new entry marked modified. Raises StaleOccurrence when the
    element index no longer exists, UnparseableDocument on undecodable input,
    RewriteFailed if post-write verification disagrees.
    """
    if alt == "" and not occurrence.decorative:
        raise ValueError("empty alt is only allowed for decorative images")
    has_bom = doc.data.startswith(codecs.BOM_UTF8)
    raw = doc.data[len(codecs.BOM_UTF8) :] if has_bom else doc.data
    encoding = "utf-8"
    match = _ENCODING_RE.search(raw[:1024]) or _CHARSET_RE.search(raw[:1024])
    if match:
        encoding = match.group(1).decode("ascii", "replace")
    try:
        text = raw.decode(encoding)
    except (UnicodeDecodeError, LookupError) as exc:
        raise UnparseableDocument(str(exc)) from exc

    count = -1
    span = None
    for name, start, end in _iter_start_tags(text):
        if name.rsplit(":", 1)[-1].lower() in _IMAGE_TAGS:
            count += 1
            if count == occurrence.element_index:
                span = (start, end)
                break
    if span is None:
        raise StaleOccurrence(
            f"{occurrence.doc_path}: image index {occurrence.element_index} not found"
        )
    new_text = _splice_alt(text, span[0], span[1], alt)
    payload = new_text.encode(encoding)
    if has_bom:
        payload = codecs.BOM_UTF8 + payload
    new_entry = doc.with_data(payload)

    before = find_images(doc, occurrence.doc_path)
    after = find_images(new_entry, occurrence.doc_path)
    if len(after) != len(before) or after[occurrence.element_index].existing_alt != alt:
        raise RewriteFailed(f"{occurrence.doc_path}: alt splice verification failed")
    return new_entry
