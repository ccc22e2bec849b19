"""Codecs and loaders for every on-disk artifact the pipeline reads or writes.

Formats:
  * IDX        -- big-endian image stacks and label vectors (MNIST convention)
  * DIVT       -- little-endian 2-D float32 tensor files
  * table CSV  -- one row per sample, plus a JSON schema sidecar
  * JSONL      -- one ``{"id": ..., "text": ...}`` object per line
  * scenarios  -- INI-style scenario definitions
"""

from divscore.dataio.errors import (
    BadMagicError,
    BadVersionError,
    DimOverflowError,
    EmptyTensorError,
    FormatError,
    NonFiniteError,
    SchemaError,
    SizeMismatchError,
    TruncatedError,
)
from divscore.dataio.idx import (
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)
from divscore.dataio.divt import read_divt, write_divt, read_divt_file, write_divt_file
from divscore.dataio.table import (
    DatasetTable,
    TableSchema,
    load_table,
    load_texts_jsonl,
    save_table,
    save_texts_jsonl,
)
from divscore.dataio.scenarios import (
    Predicate,
    ScenarioSet,
    format_scenario_config,
    load_scenarios,
    materialize_scenarios,
    parse_scenario_config,
)

__all__ = [
    "BadMagicError",
    "BadVersionError",
    "DatasetTable",
    "DimOverflowError",
    "EmptyTensorError",
    "FormatError",
    "NonFiniteError",
    "Predicate",
    "ScenarioSet",
    "SchemaError",
    "SizeMismatchError",
    "TableSchema",
    "TruncatedError",
    "format_scenario_config",
    "load_scenarios",
    "materialize_scenarios",
    "load_table",
    "load_texts_jsonl",
    "parse_scenario_config",
    "read_divt",
    "read_divt_file",
    "read_idx_images",
    "read_idx_labels",
    "save_table",
    "save_texts_jsonl",
    "write_divt",
    "write_divt_file",
    "write_idx_images",
    "write_idx_labels",
]
