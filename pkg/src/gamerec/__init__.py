"""Balance-oriented video game recommendation toolkit."""

__version__ = "0.1.0"
