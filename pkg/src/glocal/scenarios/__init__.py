"""Bundled example systems: ``workshop`` and ``robot``."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..parser import SourceDocument, load
from ..terms import label_boundaries

__all__ = ["NAMES", "path_of", "load_scenario"]

NAMES = ("workshop", "robot")


def path_of(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(NAMES)}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.glp")))


def load_scenario(name: str) -> SourceDocument:
    """Parse a bundled scenario; its main term comes back fully labelled."""
    doc = load(path_of(name))
    doc.main = label_boundaries(doc.main)
    return doc
