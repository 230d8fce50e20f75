"""Dual-decoder Transformer for joint transcription and multilingual translation, in numpy."""

__version__ = "0.1.0"
