"""Quantal rule learning experiments: corpora, a small masked LM, and
tolerance-threshold statistics."""

__version__ = "0.1.0"
