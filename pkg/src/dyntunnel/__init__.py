"""Dynamical tunnelling of a driven BEC: GPE propagation, Floquet analysis,
and the two-mode self-trapping model."""

__version__ = "0.1.0"
