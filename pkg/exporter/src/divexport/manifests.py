"""Input manifests: a CSV of image paths or a JSONL of texts.

Image manifests are CSV files with a header; the ``path`` column is
required and an optional ``id`` column names each row (defaulting to
the path itself).  Text manifests are JSONL with one
``{"id": ..., "text": ...}`` object per line — the same shape the
toolkit's caption files use, so they feed in directly.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from divexport.errors import ExportError


def load_image_manifest(path: str | os.PathLike) -> list[tuple[str, Path]]:
    """(id, image path) pairs in file order; relative paths resolve beside the manifest."""
    manifest = Path(path)
    base = manifest.parent
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise ExportError(f"{manifest}: image manifests need a 'path' column")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            raw = (row.get("path") or "").strip()
            if not raw:
                raise ExportError(f"{manifest}:{line_no}: empty path")
            sample_id = (row.get("id") or "").strip() or raw
            rows.append((sample_id, base / raw if not Path(raw).is_absolute() else Path(raw)))
    if not rows:
        raise ExportError(f"{manifest}: manifest has no rows")
    return rows


def load_text_manifest(path: str | os.PathLike) -> list[tuple[str, str]]:
    """(id, text) pairs in file order."""
    manifest = Path(path)
    rows = []
    with open(manifest) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{manifest}:{line_no}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise ExportError(f"{manifest}:{line_no}: each line needs 'id' and 'text'")
            rows.append((str(obj["id"]), str(obj["text"])))
    if not rows:
        raise ExportError(f"{manifest}: manifest has no rows")
    return rows
