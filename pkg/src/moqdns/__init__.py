"""Publish-subscribe DNS over a minimal MoQT-style transport profile."""

__version__ = "0.1.0"
