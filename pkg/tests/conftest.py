from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import epubgen  # noqa: E402


@pytest.fixture
def clean_book_bytes() -> bytes:
    return epubgen.make_book(
        n_chapters=2,
        images=[
            {"chapter": 0, "name": "fox.png", "alt": "A red fox standing in snow"},
            {"chapter": 1, "name": "map.svg", "alt": "A map of the harbour"},
        ],
    )


@pytest.fixture
def defective_book_bytes() -> bytes:
    return epubgen.make_book(
        n_chapters=2,
        language=None,
        images=[
            {"chapter": 0, "name": "fox.png", "alt": None, "caption": "A red fox at dusk"},
            {"chapter": 1, "name": "map.svg", "alt": None, "svg_title": "Harbour map"},
        ],
    )


@pytest.fixture
def clean_book(tmp_path, clean_book_bytes) -> Path:
    p = tmp_path / "clean.epub"
    p.write_bytes(clean_book_bytes)
    return p


@pytest.fixture
def defective_book(tmp_path, defective_book_bytes) -> Path:
    p = tmp_path / "defective.epub"
    p.write_bytes(defective_book_bytes)
    return p


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance verdict lines where they cannot be missed."""
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.summary_lines()
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
