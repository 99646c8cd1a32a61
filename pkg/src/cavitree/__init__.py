"""Exact iterative social learning on trees via the dynamic cavity method."""

from . import bounds, cavity, model, oracle, sim, trees, verify

__version__ = "0.1.0"

__all__ = ["bounds", "cavity", "model", "oracle", "sim", "trees",
           "verify", "__version__"]
