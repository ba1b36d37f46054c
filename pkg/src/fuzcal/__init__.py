"""Fuzzy-sphere quantization and the large-N limit of the Calogero model."""

__version__ = "0.1.0"
