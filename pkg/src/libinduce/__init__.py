"""Library learning for program synthesis: search, compress, document."""

__version__ = "0.1.0"
