"""Common exception base for the package.

Concrete error types live next to the code that raises them; they all
derive from AltgenError so callers can catch the whole family at once.
"""


class AltgenError(Exception):
    """Base class for every error raised by this package."""
