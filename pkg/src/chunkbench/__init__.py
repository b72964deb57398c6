"""Benchmark harness for document chunking strategies in dense retrieval."""

__version__ = "0.1.0"
