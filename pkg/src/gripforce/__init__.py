"""Grip-force glove telemetry, session storage and expertise statistics."""

__version__ = "0.1.0"
