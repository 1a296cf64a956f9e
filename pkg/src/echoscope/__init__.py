"""User-embedding pipeline for social news corpora."""

__version__ = "0.1.0"
