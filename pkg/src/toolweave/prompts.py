"""Prompt templates, loaded from the package's prompts/ directory.

Templates live in plain text files so they can be audited and tweaked
without touching code. Placeholders use ``$name`` substitution; a missing
placeholder raises at render time.
"""

from __future__ import annotations

from importlib import resources
from string import Template


def load(name: str) -> str:
    path = resources.files("toolweave").joinpath("prompts").joinpath(f"{name}.txt")
    return path.read_text(encoding="utf-8")


def render(name: str, **values: str) -> str:
    return Template(load(name)).substitute(**values)
