"""Versioned JSON artifacts exchanged between pipeline stages."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


class ArtifactError(ValueError):
    """An artifact is malformed or was written by an incompatible version."""


def _check_header(obj: Any, path: str | os.PathLike[str], producers: Iterable[str] | None) -> None:
    if not isinstance(obj, dict):
        raise ArtifactError(f"{path}: expected a JSON object")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ArtifactError(f"{path}: schema_version {version!r}, expected {SCHEMA_VERSION}")
    if producers is not None:
        producers = tuple(producers)
        if obj.get("producer") not in producers:
            raise ArtifactError(f"{path}: produced by {obj.get('producer')!r}, expected one of {producers}")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | os.PathLike[str], producer: str, payload: dict[str, Any]) -> None:
    body = {"schema_version": SCHEMA_VERSION, "producer": producer, **payload}
    Path(path).write_text(dumps(body), encoding="utf-8", newline="\n")


def read_json(path: str | os.PathLike[str], producers: Iterable[str] | None = None) -> dict[str, Any]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    _check_header(obj, path, producers)
    return obj


def write_jsonl(path: str | os.PathLike[str], producer: str, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            line = {"schema_version": SCHEMA_VERSION, "producer": producer, **rec}
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")


def read_jsonl(path: str | os.PathLike[str], producers: Iterable[str] | None = None) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ArtifactError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            _check_header(obj, f"{path}:{lineno}", producers)
            yield obj


def manifest_path(embeddings_path: str | os.PathLike[str]) -> Path:
    """``embeddings.jsonl`` -> ``embeddings.manifest.json`` (same directory)."""
    p = Path(embeddings_path)
    return p.with_name(p.stem + ".manifest.json")
