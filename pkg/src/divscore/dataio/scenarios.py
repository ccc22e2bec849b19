"""Scenario definitions: named subsets of a dataset table.

Config files are INI-style. Each section is one scenario; each key within
a section is a conjunction term over a subgroup tag (or the reserved name
``label``). A value of the form ``{a, b, c}`` means membership, anything
else means equality::

    [options]
    reference_scenario = plain

    [plain]
    perturbation = plain

    [plain_thin]
    perturbation = {plain, thin}

Index lists are materialized sorted by sample id, so the same table and
config produce identical scenarios everywhere.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from divscore.dataio.errors import SchemaError
from divscore.dataio.table import DatasetTable

OPTIONS_SECTION = "options"
LABEL_TAG = "label"


@dataclass(frozen=True)
class Predicate:
    """Conjunction of tag=value / tag-in-set terms."""

    terms: tuple[tuple[str, frozenset[str]], ...]

    def matches(self, tag_of: dict[str, list[str]], i: int) -> bool:
        return all(tag_of[name][i] in allowed for name, allowed in self.terms)


@dataclass
class ScenarioSet:
    """Parsed scenarios with their materialized sample index lists."""

    names: list[str]
    indices: dict[str, np.ndarray]
    predicates: dict[str, Predicate]
    reference: str | None = None

    def __iter__(self):
        return iter(self.names)


def _parse_value(raw: str) -> frozenset[str]:
    raw = raw.strip()
    if raw.startswith("{") and raw.endswith("}"):
        values = [v.strip() for v in raw[1:-1].split(",")]
        return frozenset(v for v in values if v)
    return frozenset((raw,))


def parse_scenario_config(text: str) -> tuple[list[tuple[str, Predicate]], str | None]:
    """Parse config text into (name, predicate) pairs plus the reference name."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # tag names are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(f"scenario config: {exc}") from None

    reference = None
    scenarios: list[tuple[str, Predicate]] = []
    for section in parser.sections():
        if section == OPTIONS_SECTION:
            reference = parser.get(section, "reference_scenario", fallback=None)
            continue
        terms = tuple(
            (key, _parse_value(value)) for key, value in parser.items(section)
        )
        if not terms:
            raise SchemaError(f"scenario {section!r} has no filter terms")
        scenarios.append((section, Predicate(terms)))

    names = [name for name, _ in scenarios]
    if len(set(names)) != len(names):
        raise SchemaError("scenario names are not unique")
    if reference is not None and reference not in names:
        raise SchemaError(f"reference scenario {reference!r} is not defined")
    return scenarios, reference


def load_scenarios(config_path: str | os.PathLike, table: DatasetTable) -> ScenarioSet:
    """Parse a scenario config file and materialize its index lists.

    Raises :class:`SchemaError` when a predicate references an unknown tag
    or a scenario selects fewer than 2 samples.
    """
    with open(config_path, encoding="utf-8") as fh:
        scenarios, reference = parse_scenario_config(fh.read())
    return materialize_scenarios(scenarios, table, reference)


def materialize_scenarios(
    scenarios: list[tuple[str, Predicate]],
    table: DatasetTable,
    reference: str | None = None,
) -> ScenarioSet:
    tag_of = dict(table.tags)
    tag_of[LABEL_TAG] = [str(int(v)) for v in table.labels]

    # indices sorted by sample id, independent of file row order
    by_id = sorted(range(table.n_samples), key=lambda i: table.sample_ids[i])

    names: list[str] = []
    indices: dict[str, np.ndarray] = {}
    predicates: dict[str, Predicate] = {}
    for name, predicate in scenarios:
        for tag, _ in predicate.terms:
            if tag not in tag_of:
                raise SchemaError(
                    f"scenario {name!r} references unknown tag {tag!r}; "
                    f"have {sorted(table.tags)}"
                )
        selected = np.array(
            [i for i in by_id if predicate.matches(tag_of, i)], dtype=np.int64
        )
        if selected.size < 2:
            raise SchemaError(
                f"scenario {name!r} selects {selected.size} samples, need at least 2"
            )
        names.append(name)
        indices[name] = selected
        predicates[name] = predicate

    return ScenarioSet(names=names, indices=indices, predicates=predicates, reference=reference)


def format_scenario_config(
    scenarios: list[tuple[str, dict[str, list[str]]]],
    reference: str | None = None,
) -> str:
    """Render scenario definitions back into config text."""
    lines: list[str] = []
    if reference is not None:
        lines += [f"[{OPTIONS_SECTION}]", f"reference_scenario = {reference}", ""]
    for name, terms in scenarios:
        lines.append(f"[{name}]")
        for tag, values in terms.items():
            if len(values) == 1:
                lines.append(f"{tag} = {values[0]}")
            else:
                lines.append(f"{tag} = {{{', '.join(values)}}}")
        lines.append("")
    return "\n".join(lines)
