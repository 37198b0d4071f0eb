"""Cross-lingual multi-label emotion detection toolkit."""

__version__ = "0.1.0"
