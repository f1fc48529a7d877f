"""Bundled geometry and k-profile files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

PREFIX = "corpus:"


def _root():
    return resources.files("fforge") / "data"


def names(suffix: str | None = None) -> list[str]:
    out = sorted(p.name for p in _root().iterdir() if p.name.endswith((".geom", ".kprof")))
    return [n for n in out if suffix is None or n.endswith(suffix)]


def read(name: str) -> str:
    return (_root() / name).read_text(encoding="utf-8")


def resolve_text(ref: str, suffix: str | None = None) -> tuple[str, str]:
    """(text, label) for a file path or a ``corpus:NAME`` reference.

    ``suffix`` completes a corpus name given without extension.
    """
    if ref.startswith(PREFIX):
        name = ref[len(PREFIX):]
        if suffix and name + suffix in names():
            name += suffix
        if name not in names():
            raise FileNotFoundError(f"no corpus file {name!r}; available: {', '.join(names())}")
        return read(name), ref
    return Path(ref).read_text(encoding="utf-8"), ref
