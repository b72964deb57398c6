"""Versioned prompt templates for LLM-guided segmentation."""

from __future__ import annotations

import hashlib
from importlib import resources

# Marker phrases the deterministic stub keys on; they live in the templates.
PROPOSITION_MARKER = "minimal standalone facts"
LUMBER_MARKER = "numbered sequence of consecutive paragraphs"


def load_prompt(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")


def prompt_hash(name: str) -> str:
    return hashlib.sha256(load_prompt(name).encode("utf-8")).hexdigest()[:16]
