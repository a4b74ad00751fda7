"""Delay-based spacing policy platoons: spatial-domain control, simulation and
string-stability verification."""

__version__ = "0.1.0"
