"""Parameter-efficient training of layered variational quantum circuits."""

__version__ = "0.1.0"
