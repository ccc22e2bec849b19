"""Dataset table loader: aligned per-sample records from CSV plus JSONL texts.

A table row carries a sample id, an optional index into an image stack, an
optional text, a fixed-width metadata vector, an integer class label, a
group id, and named subgroup tags. Missing numeric metadata is encoded as
-1. Categorical metadata columns are dictionary-encoded in first-seen
order; the dictionary is persisted next to the CSV (``<name>.dict.json``)
so codes are stable across save/load cycles.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from divscore.dataio.errors import SchemaError

MISSING_VALUE = -1.0


@dataclass(frozen=True)
class TableSchema:
    """Names the roles of the CSV columns."""

    sample_id: str = "sample_id"
    label: str = "label"
    group: str = "group_id"
    image_index: str | None = "image_index"
    metadata: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "label": self.label,
            "group": self.group,
            "image_index": self.image_index,
            "metadata": list(self.metadata),
            "tags": list(self.tags),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TableSchema":
        return cls(
            sample_id=obj.get("sample_id", "sample_id"),
            label=obj.get("label", "label"),
            group=obj.get("group", "group_id"),
            image_index=obj.get("image_index"),
            metadata=tuple(obj.get("metadata", ())),
            tags=tuple(obj.get("tags", ())),
        )


@dataclass
class DatasetTable:
    """Aligned per-sample records; every field has one entry per sample."""

    sample_ids: list[str]
    labels: np.ndarray
    group_ids: list[str]
    metadata: np.ndarray  # (n, m) float64, missing encoded as -1
    image_index: list[int | None]
    texts: list[str | None]
    tags: dict[str, list[str]]
    metadata_columns: tuple[str, ...] = ()
    categorical_codes: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.sample_ids)
        if len(set(self.sample_ids)) != n:
            raise SchemaError("sample ids are not unique")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (n,):
            raise SchemaError(f"labels shape {self.labels.shape} != ({n},)")
        if n and self.labels.min() < 0:
            raise SchemaError("labels must be non-negative integers")
        self.metadata = np.asarray(self.metadata, dtype=np.float64)
        if self.metadata.ndim != 2 or self.metadata.shape[0] != n:
            raise SchemaError(f"metadata shape {self.metadata.shape} != ({n}, m)")
        for name, values in self.tags.items():
            if len(values) != n:
                raise SchemaError(f"tag column {name!r} has {len(values)} values, expected {n}")
        for seq, what in ((self.group_ids, "group_ids"), (self.image_index, "image_index"), (self.texts, "texts")):
            if len(seq) != n:
                raise SchemaError(f"{what} has {len(seq)} entries, expected {n}")

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.n_samples else 0

    def tag_values(self, name: str) -> list[str]:
        if name not in self.tags:
            raise SchemaError(f"unknown tag {name!r}; have {sorted(self.tags)}")
        return self.tags[name]

    def subset(self, indices: np.ndarray) -> "DatasetTable":
        idx = np.asarray(indices, dtype=np.int64)
        return DatasetTable(
            sample_ids=[self.sample_ids[i] for i in idx],
            labels=self.labels[idx],
            group_ids=[self.group_ids[i] for i in idx],
            metadata=self.metadata[idx],
            image_index=[self.image_index[i] for i in idx],
            texts=[self.texts[i] for i in idx],
            tags={k: [v[i] for i in idx] for k, v in self.tags.items()},
            metadata_columns=self.metadata_columns,
            categorical_codes=self.categorical_codes,
        )


def _dict_path(csv_path: str | os.PathLike) -> Path:
    return Path(str(csv_path) + ".dict.json")


def _parse_float(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        return float(cell)
    except ValueError:
        return None


def load_table(
    csv_path: str | os.PathLike,
    schema: TableSchema,
    jsonl_path: str | os.PathLike | None = None,
) -> DatasetTable:
    """Load a dataset table from a headered CSV, plus optional JSONL texts.

    Numeric metadata columns keep their values with empty cells mapped to
    -1. Columns containing any non-numeric cell are treated as categorical
    and dictionary-encoded; an existing ``<csv>.dict.json`` fixes the codes,
    otherwise codes follow first-seen order and the dictionary is written
    back alongside the CSV.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: empty file, expected a header row") from None
        rows = list(reader)

    col_of = {name: i for i, name in enumerate(header)}
    required = [schema.sample_id, schema.label, schema.group, *schema.metadata, *schema.tags]
    if schema.image_index is not None and schema.image_index in col_of:
        required.append(schema.image_index)
    for name in required:
        if name not in col_of:
            raise SchemaError(f"{csv_path}: column {name!r} missing from header {header}")

    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(
                f"{csv_path}:{lineno}: ragged row with {len(row)} cells, header has {len(header)}"
            )

    sample_ids = [row[col_of[schema.sample_id]] for row in rows]
    seen: set[str] = set()
    for sid in sample_ids:
        if sid in seen:
            raise SchemaError(f"{csv_path}: duplicate sample id {sid!r}")
        seen.add(sid)

    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        cell = row[col_of[schema.label]].strip()
        try:
            labels[i] = int(cell)
        except ValueError:
            raise SchemaError(f"{csv_path}: unknown label value {cell!r} in row {sample_ids[i]!r}") from None
        if labels[i] < 0:
            raise SchemaError(f"{csv_path}: negative label {cell!r} in row {sample_ids[i]!r}")

    group_ids = [row[col_of[schema.group]] for row in rows]

    image_index: list[int | None] = [None] * len(rows)
    if schema.image_index is not None and schema.image_index in col_of:
        for i, row in enumerate(rows):
            cell = row[col_of[schema.image_index]].strip()
            image_index[i] = int(cell) if cell else None

    # Categorical dictionaries: reuse the persisted mapping when present so
    # cosine metadata diversity is reproducible across load cycles.
    dict_file = _dict_path(csv_path)
    codes: dict[str, dict[str, int]] = {}
    if dict_file.exists():
        with open(dict_file, encoding="utf-8") as fh:
            codes = {col: dict(mapping) for col, mapping in json.load(fh).items()}

    metadata = np.full((len(rows), len(schema.metadata)), MISSING_VALUE, dtype=np.float64)
    new_codes = False
    for j, col in enumerate(schema.metadata):
        cells = [row[col_of[col]] for row in rows]
        numeric = [_parse_float(c) for c in cells]
        is_categorical = col in codes or any(
            v is None and c.strip() for c, v in zip(cells, numeric)
        )
        if not is_categorical:
            for i, v in enumerate(numeric):
                metadata[i, j] = MISSING_VALUE if v is None else v
        else:
            mapping = codes.setdefault(col, {})
            for i, cell in enumerate(cells):
                cell = cell.strip()
                if not cell:
                    continue  # stays -1
                if cell not in mapping:
                    mapping[cell] = len(mapping)
                    new_codes = True
                metadata[i, j] = float(mapping[cell])

    if new_codes or (codes and not dict_file.exists()):
        with open(dict_file, "w", encoding="utf-8") as fh:
            json.dump(codes, fh, indent=1, sort_keys=True)

    tags = {name: [row[col_of[name]] for row in rows] for name in schema.tags}

    texts: list[str | None] = [None] * len(rows)
    if jsonl_path is not None:
        by_id = load_texts_jsonl(jsonl_path)
        texts = [by_id.get(sid) for sid in sample_ids]

    return DatasetTable(
        sample_ids=sample_ids,
        labels=labels,
        group_ids=group_ids,
        metadata=metadata,
        image_index=image_index,
        texts=texts,
        tags=tags,
        metadata_columns=schema.metadata,
        categorical_codes=codes,
    )


def save_table(csv_path: str | os.PathLike, table: DatasetTable, schema: TableSchema) -> None:
    """Write a table back to CSV, persisting its categorical dictionary.

    Categorical cells are written as their original strings (reverse of the
    dictionary) so a save/load round trip reproduces the metadata exactly.
    """
    inverse = {
        col: {code: value for value, code in mapping.items()}
        for col, mapping in table.categorical_codes.items()
    }
    header = [schema.sample_id, schema.label, schema.group]
    if schema.image_index is not None:
        header.append(schema.image_index)
    header.extend(schema.metadata)
    header.extend(schema.tags)

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(table.n_samples):
            row = [table.sample_ids[i], str(int(table.labels[i])), table.group_ids[i]]
            if schema.image_index is not None:
                idx = table.image_index[i]
                row.append("" if idx is None else str(idx))
            for j, col in enumerate(schema.metadata):
                v = table.metadata[i, j]
                if col in inverse:
                    row.append("" if v == MISSING_VALUE else inverse[col][int(v)])
                else:
                    row.append("" if v == MISSING_VALUE else repr(float(v)))
            for name in schema.tags:
                row.append(table.tags[name][i])
            writer.writerow(row)

    if table.categorical_codes:
        with open(_dict_path(csv_path), "w", encoding="utf-8") as fh:
            json.dump(table.categorical_codes, fh, indent=1, sort_keys=True)


def load_texts_jsonl(path: str | os.PathLike) -> dict[str, str]:
    """Read ``{"id": ..., "text": ...}`` lines into an id -> text mapping."""
    texts: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if "id" not in obj or "text" not in obj:
                raise SchemaError(f"{path}:{lineno}: object needs 'id' and 'text' keys")
            texts[str(obj["id"])] = str(obj["text"])
    return texts


def save_texts_jsonl(path: str | os.PathLike, table: DatasetTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, text in zip(table.sample_ids, table.texts):
            if text is not None:
                fh.write(json.dumps({"id": sid, "text": text}) + "\n")
