"""Verification of data-aware processes with block-structured control flow."""
__version__ = "0.1.0"
