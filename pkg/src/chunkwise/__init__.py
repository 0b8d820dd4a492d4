"""chunkwise: equational reasoning about fractions in consistent chunks."""

__version__ = "0.1.0"
