"""Kloosterman-sum laboratory: exact finite-field sum kernels and verifiers."""

__version__ = "0.1.0"
