"""First-order policy learning through contact, at desk scale."""

__version__ = "0.1.0"
