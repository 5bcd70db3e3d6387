"""Exact Fefferman-Graham expansions for generalized Lovelock equations."""

__version__ = "0.1.0"
