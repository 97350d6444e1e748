"""Subtree-attention error localization for student programs, with knowledge tracing and grade models."""

__version__ = "0.1.0"
