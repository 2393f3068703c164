"""Spectral embeddings of graph pencils by orthogonalization-free optimization."""
from __future__ import annotations

__version__ = "0.1.0"
