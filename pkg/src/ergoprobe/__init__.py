"""Exact-diagonalization diagnostics of ergodicity breaking in spin chains."""

__version__ = "0.1.0"

from . import evolve, hilbert, models, probes, spectra  # noqa: F401
