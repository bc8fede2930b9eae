"""Multigrid error-bounded lossy compression and data refactoring."""

__version__ = "0.1.0"
