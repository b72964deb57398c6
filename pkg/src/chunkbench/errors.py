"""Shared exception types."""

from __future__ import annotations


class ChunkbenchError(Exception):
    """Base class for errors raised by this package."""


class IngestError(ChunkbenchError):
    """Malformed or undecodable input data; message carries file/line context."""


class ConfigError(ChunkbenchError):
    """Invalid configuration or a request the remote side rejected as such."""


class TransportError(ChunkbenchError):
    """Network-level failure talking to a remote service (after retries)."""


class PreconditionError(ChunkbenchError):
    """A documented precondition was violated by the caller."""
