"""Surface-area property testing through noise sensitivity."""

__version__ = "0.1.0"
