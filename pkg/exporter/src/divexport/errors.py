"""Exporter failure type."""


class ExportError(Exception):
    """A job cannot produce its output; the message names the offending inputs."""
