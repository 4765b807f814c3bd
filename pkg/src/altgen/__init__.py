"""Batch EPUB accessibility auditing, alt-text repair, and validation."""

from altgen.errors import AltgenError

__version__ = "0.1.0"

__all__ = ["AltgenError", "__version__"]
