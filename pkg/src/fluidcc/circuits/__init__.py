"""Example circuits shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files(__name__).iterdir() if p.name.endswith(".fcc"))


def path(name: str) -> Path:
    """Filesystem path of a shipped circuit, by name with or without ``.fcc``."""
    stem = name[:-4] if name.endswith(".fcc") else name
    if stem not in names():
        raise KeyError(f"no shipped circuit named {stem!r} (have: {', '.join(names())})")
    return Path(str(resources.files(__name__) / f"{stem}.fcc"))


def text(name: str) -> str:
    return path(name).read_text()
