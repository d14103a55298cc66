"""Pre-shared key establishment for QKD networks from PUF challenge-response databases."""

__version__ = "0.1.0"
