"""Evidential zero-shot learning with bidirectional attribute/visual grounding."""

__version__ = "0.1.0"
