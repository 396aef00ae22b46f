"""Collection and analysis pipeline for Tor onion services."""

__version__ = "0.1.0"
