"""Agentic sizing of multi-stage mm-wave LNAs with coupled-resonator interstages."""

__version__ = "0.1.0"
