"""One binary orchestrating the pipeline: generate, extract, score, rank,
correlate, train, and map — with JSON/CSV/SVG reports.

Every subcommand reads and writes only the file formats the library
modules define. Exit codes: 0 success, 1 validation error, 2 I/O error.
All randomness is governed by --seed; reports embed a RunManifest so a
result can be traced back to its exact inputs and options.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from divscore import __version__
from divscore.dataio import (
    FormatError,
    SchemaError,
    TableSchema,
    load_scenarios,
    load_table,
    read_divt_file,
    read_idx_images,
    write_divt_file,
)
from divscore.dataio.table import DatasetTable
from divscore.dataio.scenarios import ScenarioSet
from divscore.datamap import (
    DataMapPoint,
    datamap_stats,
    density_grid,
    flag_outlier_subgroups,
    save_grid_csv,
    save_points_csv,
    subgroup_maps,
)
from divscore.divmetrics import ScenarioReport, evaluate_scenarios
from divscore.features import FeatureMatrix, hog_features, pixel_features
from divscore.resample import group_stratified_kfold, save_fold_csv
from divscore.stats import (
    CorrelationMatrix,
    correlation_matrix,
    correlation_to_csv,
    rank_scenarios,
    ranking_to_csv,
)
from divscore.toygen import KINDS, build_scenarios, write_dataset
from divscore.trainer import TrainConfig, load_prob_log, save_merged_log, train_cv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class UsageError(Exception):
    """Bad flags or option values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we classify instead
        raise UsageError(message)


# ---------------------------------------------------------------------------
# run manifest


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Inputs:
    """Records a digest of every input file a command reads."""

    def __init__(self) -> None:
        self.digests: dict[str, str] = {}

    def __call__(self, path: str | os.PathLike) -> Path:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"missing input: {p}")
        self.digests[p.as_posix()] = _sha256_bytes(p.read_bytes())
        return p


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility envelope embedded with every report.

    The stable fields (command, option hash, seed, input digests, tool
    version) appear in every report so identical runs stay byte-identical;
    wall time is volatile and only ever lands in sidecar manifests, and is
    suppressed entirely under --reproducible.
    """

    command: str
    config_hash: str
    seed: int
    inputs: dict[str, str]
    version: str
    wall_time_s: float | None = None

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "version": self.version,
        }

    def sidecar_json(self) -> dict:
        obj = self.to_json()
        if self.wall_time_s is not None:
            obj["wall_time_s"] = round(self.wall_time_s, 6)
        return obj

    def comment_lines(self) -> list[str]:
        lines = [
            "# manifest command={} config={} seed={} version={}".format(
                self.command, self.config_hash, self.seed, self.version
            )
        ]
        for path, digest in sorted(self.inputs.items()):
            lines.append(f"# input {path} sha256={digest}")
        return lines


def _config_hash(args: argparse.Namespace) -> str:
    pairs = [
        f"{key}={vars(args)[key]!r}"
        for key in sorted(vars(args))
        if key != "func"
    ]
    return _sha256_bytes("\n".join(pairs).encode("utf-8"))[:16]


def _manifest(args: argparse.Namespace, record: _Inputs, started: float) -> RunManifest:
    wall = None if args.reproducible else time.perf_counter() - started
    return RunManifest(
        command=args.command,
        config_hash=_config_hash(args),
        seed=args.seed,
        inputs=dict(record.digests),
        version=__version__,
        wall_time_s=wall,
    )


# ---------------------------------------------------------------------------
# report writers


def _write_json(path: str | os.PathLike, obj: dict) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_json_report(path, manifest: RunManifest, payload: dict) -> None:
    _write_json(path, {"manifest": manifest.to_json(), **payload})


def _write_csv_report(path, manifest: RunManifest, body: str) -> None:
    text = "\n".join(manifest.comment_lines()) + "\n" + body
    Path(path).write_text(text, encoding="utf-8")


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg_document(
    width: float, height: float, body: list[str], manifest: RunManifest, reproducible: bool
) -> str:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}"'
        f' viewBox="0 0 {width:g} {height:g}" font-family="sans-serif">'
    ]
    for comment in manifest.comment_lines():
        lines.append(f"<!-- {comment[2:]} -->")
    if not reproducible:
        lines.append(f"<!-- generated {time.strftime('%Y-%m-%dT%H:%M:%S%z')} -->")
    lines.extend(body)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _diverging_color(value: float) -> str:
    """White at 0 toward red for +1, blue for -1; gray for absent."""
    if not np.isfinite(value):
        return "#c8c8c8"
    t = float(np.clip(value, -1.0, 1.0))
    hi = (178, 24, 43) if t >= 0 else (33, 102, 172)
    f = abs(t)
    rgb = tuple(round(255 + (c - 255) * f) for c in hi)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


_PALETTE = (
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
    "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
)


def _correlation_svg(cm: CorrelationMatrix, manifest: RunManifest, reproducible: bool) -> str:
    n = len(cm.metrics)
    cell = 54.0
    left = 16.0 + 7.0 * max(len(name) for name in cm.metrics)
    top = 14.0 + 5.0 * max(len(name) for name in cm.metrics)
    width = left + n * cell + 16.0
    height = top + n * cell + 16.0
    body = []
    for j, name in enumerate(cm.metrics):
        x = left + j * cell + cell / 2
        y = top - 8.0
        body.append(
            f'<text x="{x:g}" y="{y:g}" font-size="11" text-anchor="start"'
            f' transform="rotate(-45 {x:g} {y:g})">{_esc(name)}</text>'
        )
    for i, row_name in enumerate(cm.metrics):
        y = top + i * cell
        body.append(
            f'<text x="{left - 6:g}" y="{y + cell / 2 + 4:g}" font-size="11"'
            f' text-anchor="end">{_esc(row_name)}</text>'
        )
        for j in range(n):
            value = float(cm.values[i, j])
            x = left + j * cell
            body.append(
                f'<rect x="{x:g}" y="{y:g}" width="{cell:g}" height="{cell:g}"'
                f' fill="{_diverging_color(value)}" stroke="#ffffff"/>'
            )
            label = "n/a" if not np.isfinite(value) else f"{value:+.2f}"
            color = "#ffffff" if np.isfinite(value) and abs(value) > 0.55 else "#1a1a1a"
            body.append(
                f'<text x="{x + cell / 2:g}" y="{y + cell / 2 + 4:g}" font-size="11"'
                f' text-anchor="middle" fill="{color}">{label}</text>'
            )
    return _svg_document(width, height, body, manifest, reproducible)


def _datamap_svg(
    points: list[DataMapPoint],
    tag_name: str | None,
    manifest: RunManifest,
    reproducible: bool,
) -> str:
    left, top, plot_w, plot_h = 52.0, 24.0, 380.0, 360.0
    legend_w = 150.0 if tag_name else 20.0
    width = left + plot_w + legend_w
    height = top + plot_h + 48.0

    def px(variability: float) -> float:
        return left + (variability / 0.5) * plot_w

    def py(confidence: float) -> float:
        return top + (1.0 - confidence) * plot_h

    body = [
        f'<rect x="{left:g}" y="{top:g}" width="{plot_w:g}" height="{plot_h:g}"'
        ' fill="#fafafa" stroke="#888888"/>'
    ]
    for i in range(6):  # variability ticks 0.0 .. 0.5
        v = i / 10.0
        body.append(
            f'<line x1="{px(v):g}" y1="{top + plot_h:g}" x2="{px(v):g}"'
            f' y2="{top + plot_h + 4:g}" stroke="#888888"/>'
        )
        body.append(
            f'<text x="{px(v):g}" y="{top + plot_h + 16:g}" font-size="10"'
            f' text-anchor="middle">{v:.1f}</text>'
        )
    for i in range(6):  # confidence ticks 0.0 .. 1.0
        c = i / 5.0
        body.append(
            f'<line x1="{left - 4:g}" y1="{py(c):g}" x2="{left:g}" y2="{py(c):g}"'
            ' stroke="#888888"/>'
        )
        body.append(
            f'<text x="{left - 7:g}" y="{py(c) + 3:g}" font-size="10"'
            f' text-anchor="end">{c:.1f}</text>'
        )
    body.append(
        f'<text x="{left + plot_w / 2:g}" y="{height - 8:g}" font-size="11"'
        ' text-anchor="middle">variability</text>'
    )
    body.append(
        f'<text x="14" y="{top + plot_h / 2:g}" font-size="11" text-anchor="middle"'
        f' transform="rotate(-90 14 {top + plot_h / 2:g})">confidence</text>'
    )

    if tag_name:
        groups = subgroup_maps(points, tag_name)
        ordered = sorted(groups)
        for k, value in enumerate(ordered):
            color = _PALETTE[k % len(_PALETTE)]
            for p in groups[value]:
                body.append(
                    f'<circle cx="{px(p.variability):.2f}" cy="{py(p.confidence):.2f}"'
                    f' r="3" fill="{color}" fill-opacity="0.75"/>'
                )
            ly = top + 12.0 + 16.0 * k
            lx = left + plot_w + 14.0
            body.append(f'<rect x="{lx:g}" y="{ly - 8:g}" width="9" height="9" fill="{color}"/>')
            body.append(
                f'<text x="{lx + 13:g}" y="{ly:g}" font-size="10">'
                f"{_esc(f'{tag_name}={value}')}</text>"
            )
    else:
        for p in points:
            body.append(
                f'<circle cx="{px(p.variability):.2f}" cy="{py(p.confidence):.2f}"'
                f' r="3" fill="#4269d0" fill-opacity="0.75"/>'
            )
    return _svg_document(width, height, body, manifest, reproducible)


# ---------------------------------------------------------------------------
# input loading


@dataclass
class _Dataset:
    table: DatasetTable
    scenarios: ScenarioSet | None


def _load_dataset(
    record: _Inputs,
    data_dir: str,
    *,
    need_scenarios: bool = True,
    ref_override: str | None = None,
) -> _Dataset:
    root = Path(data_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"data directory not found: {root}")
    schema = TableSchema.from_json(
        json.loads(record(root / "schema.json").read_text(encoding="utf-8"))
    )
    jsonl = root / "captions.jsonl"
    if jsonl.is_file():
        record(jsonl)
    else:
        jsonl = None
    table = load_table(record(root / "table.csv"), schema, jsonl_path=jsonl)
    scenarios = None
    if need_scenarios:
        scenarios = load_scenarios(record(root / "scenarios.cfg"), table)
        if ref_override is not None:
            if ref_override not in scenarios.names:
                raise SchemaError(
                    f"--ref-scenario {ref_override!r} is not a declared scenario;"
                    f" have {scenarios.names}"
                )
            scenarios.reference = ref_override
    return _Dataset(table=table, scenarios=scenarios)


def _load_images(record: _Inputs, data_dir: str) -> np.ndarray:
    path = Path(data_dir) / "images.idx"
    if not path.is_file():
        raise FileNotFoundError(
            f"missing input: {path} (needed for pixel/hog features;"
            ' pass --features "" to skip image metrics)'
        )
    return read_idx_images(record(path).read_bytes())


def _align_to_table(values: np.ndarray, table: DatasetTable) -> np.ndarray:
    """Reorder per-image rows into table-row order via image_index."""
    if any(i is None for i in table.image_index):
        raise SchemaError("every table row needs an image_index to use image features")
    order = np.asarray(table.image_index, dtype=np.int64)
    if order.size and (order.min() < 0 or order.max() >= values.shape[0]):
        raise SchemaError(
            f"image_index out of range: stack has {values.shape[0]} images"
        )
    return values[order]


def _feature_sources(
    record: _Inputs, spec: str, data_dir: str, table: DatasetTable
) -> dict[str, FeatureMatrix]:
    """Parse --features: comma list of pixel, hog, or name=path.divt."""
    sources: dict[str, FeatureMatrix] = {}
    images = None
    for token in (t.strip() for t in spec.split(",")):
        if not token:
            continue
        if token in ("pixel", "hog"):
            if images is None:
                images = _load_images(record, data_dir)
            computed = pixel_features(images) if token == "pixel" else hog_features(images)
            sources[token] = FeatureMatrix(_align_to_table(computed.values, table), token)
        else:
            name, sep, path = token.partition("=")
            if not sep or not name or not path:
                raise UsageError(
                    f"--features token {token!r} must be pixel, hog, or name=path.divt"
                )
            values = read_divt_file(record(path))
            if values.shape[0] != table.n_samples:
                raise SchemaError(
                    f"{path}: {values.shape[0]} feature rows for {table.n_samples} samples"
                )
            sources[name] = FeatureMatrix(np.asarray(values, dtype=np.float64), "external")
    return sources


def _load_probs(record: _Inputs, path: str, table: DatasetTable) -> np.ndarray:
    probs = np.asarray(read_divt_file(record(path)), dtype=np.float64)
    if probs.shape[0] != table.n_samples:
        raise SchemaError(f"{path}: {probs.shape[0]} probability rows for {table.n_samples} samples")
    sums = probs.sum(axis=1)
    if (sums <= 0).any():
        raise SchemaError(f"{path}: probability rows must have positive sums")
    return probs / sums[:, None]  # undo float32 storage rounding


def _load_embeddings(record: _Inputs, path: str, table: DatasetTable) -> np.ndarray:
    emb = np.asarray(read_divt_file(record(path)), dtype=np.float64)
    if emb.shape[0] != table.n_samples:
        raise SchemaError(f"{path}: {emb.shape[0]} embedding rows for {table.n_samples} samples")
    return emb


def _resolve_threads(args: argparse.Namespace) -> int | None:
    value = args.threads
    if value is None:
        env = os.environ.get("DIVSCORE_THREADS", "").strip()
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"DIVSCORE_THREADS must be an integer, got {env!r}") from None
    if value is not None and value < 1:
        raise UsageError("--threads must be >= 1")
    return value


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name) in (None, ""):
            flag = "--" + name.replace("_", "-")
            raise UsageError(f"{args.command}: {flag} is required (flag or config file)")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_toy(args: argparse.Namespace) -> int:
    _require(args, "out")
    started = time.perf_counter()
    record = _Inputs()
    dataset = build_scenarios(args.n, args.seed)
    out = Path(args.out)
    write_dataset(out, dataset)
    _write_json(out / "manifest.json", _manifest(args, record, started).sidecar_json())
    print(f"wrote {dataset.table.n_samples} samples across {len(KINDS)} pools to {out}")
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    _require(args, "data", "out")
    started = time.perf_counter()
    record = _Inputs()
    images = _load_images(record, args.data)
    matrix = pixel_features(images) if args.features == "pixel" else hog_features(images)
    write_divt_file(args.out, matrix.values)
    _write_json(
        Path(str(args.out) + ".manifest.json"),
        _manifest(args, record, started).sidecar_json(),
    )
    print(f"wrote {matrix.n}x{matrix.d} {args.features} features to {args.out}")
    return EXIT_OK


def _evaluate(args: argparse.Namespace, record: _Inputs) -> ScenarioReport:
    dataset = _load_dataset(record, args.data, ref_override=args.ref_scenario)
    sources = _feature_sources(record, args.features, args.data, dataset.table)
    probs = _load_probs(record, args.probs, dataset.table) if args.probs else None
    embeddings = (
        _load_embeddings(record, args.embeddings, dataset.table) if args.embeddings else None
    )
    return evaluate_scenarios(
        dataset.table,
        dataset.scenarios,
        sources or None,
        probs,
        embeddings,
        seed=args.seed,
        subsample_fraction=args.subsample_fraction,
        subsample_repeats=args.subsample_repeats,
        with_bootstrap=args.bootstrap,
        bootstrap_reps=args.bootstrap_reps,
        level=args.level,
        threads=_resolve_threads(args),
    )


def cmd_metrics(args: argparse.Namespace) -> int:
    _require(args, "data", "out")
    started = time.perf_counter()
    record = _Inputs()
    report = _evaluate(args, record)
    manifest = _manifest(args, record, started)
    _write_json_report(args.out, manifest, {"report": report.to_json()})
    if args.csv:
        _write_csv_report(args.csv, manifest, report.to_csv())
    print(
        f"evaluated {len(report.metric_names())} metrics on"
        f" {len(report.scenario_names)} scenarios -> {args.out}"
    )
    return EXIT_OK


def _read_report(record: _Inputs, path: str) -> ScenarioReport:
    obj = json.loads(record(path).read_text(encoding="utf-8"))
    return ScenarioReport.from_json(obj.get("report", obj))


def cmd_rank(args: argparse.Namespace) -> int:
    _require(args, "report", "out")
    started = time.perf_counter()
    record = _Inputs()
    report = _read_report(record, args.report)
    ranking = rank_scenarios(report.matrix(), report.scenario_names)
    _write_csv_report(args.out, _manifest(args, record, started), ranking_to_csv(ranking))
    print(f"ranked {len(ranking.scenarios)} scenarios under {len(ranking.metrics)} metrics -> {args.out}")
    return EXIT_OK


def cmd_correlate(args: argparse.Namespace) -> int:
    _require(args, "report", "out")
    started = time.perf_counter()
    record = _Inputs()
    report = _read_report(record, args.report)
    ranking = rank_scenarios(report.matrix(), report.scenario_names)
    matrix = correlation_matrix(ranking)
    manifest = _manifest(args, record, started)
    outputs = [token.strip() for token in args.out.split(",") if token.strip()]
    if not outputs:
        raise UsageError("--out needs at least one .csv or .svg path")
    for out in outputs:
        if out.endswith(".csv"):
            _write_csv_report(out, manifest, correlation_to_csv(matrix))
        elif out.endswith(".svg"):
            Path(out).write_text(
                _correlation_svg(matrix, manifest, args.reproducible), encoding="utf-8"
            )
        else:
            raise UsageError(f"--out entries must end in .csv or .svg, got {out!r}")
    print(f"correlated {len(matrix.metrics)} metric rankings -> {', '.join(outputs)}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    _require(args, "data", "out")
    started = time.perf_counter()
    record = _Inputs()
    dataset = _load_dataset(record, args.data, need_scenarios=False)
    sources = _feature_sources(record, args.features, args.data, dataset.table)
    if len(sources) != 1:
        raise UsageError("train needs exactly one --features source")
    features = next(iter(sources.values()))
    assignment = group_stratified_kfold(
        dataset.table.labels, dataset.table.group_ids, k=args.folds, seed=args.seed
    )
    config = TrainConfig(
        learning_rate=args.learning_rate,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
    )
    result = train_cv(
        features, dataset.table.labels, assignment, config, sample_ids=dataset.table.sample_ids
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_fold_csv(out / "folds.csv", dataset.table.sample_ids, assignment)
    write_divt_file(out / "probs.divt", result.oof_probs)
    save_merged_log(out / "prob_log.csv", result.merged_log())
    summary = {
        "mean_val_auc": result.mean_val_auc,
        "folds": [
            {
                "fold": fold.fold,
                "val_auc": fold.val_auc,
                "best_epoch": fold.best_epoch,
                "stopped_epoch": fold.log.stopped_epoch,
            }
            for fold in result.folds
        ],
    }
    _write_json_report(out / "summary.json", _manifest(args, record, started), {"training": summary})
    print(
        f"trained {args.folds} folds, mean validation AUC {result.mean_val_auc:.4f} -> {out}"
    )
    return EXIT_OK


def cmd_datamap(args: argparse.Namespace) -> int:
    _require(args, "log", "out")
    started = time.perf_counter()
    record = _Inputs()
    series = load_prob_log(record(args.log))
    tags_by_id = None
    if args.data:
        dataset = _load_dataset(record, args.data, need_scenarios=False)
        table = dataset.table
        tags_by_id = {
            sid: {name: table.tags[name][i] for name in table.tags}
            for i, sid in enumerate(table.sample_ids)
        }
    points = datamap_stats(series, tags_by_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_points_csv(out / "datamap_points.csv", points)
    save_grid_csv(out / "datamap_density.csv", density_grid(points))
    manifest = _manifest(args, record, started)
    flagged: list[str] = []
    payload: dict = {"points": len(points)}
    if args.tag:
        flagged = flag_outlier_subgroups(points, args.tag, threshold=args.threshold)
        payload.update({"tag": args.tag, "threshold": args.threshold, "flagged": flagged})
    _write_json_report(out / "flags.json", manifest, payload)
    (out / "datamap.svg").write_text(
        _datamap_svg(points, args.tag, manifest, args.reproducible), encoding="utf-8"
    )
    summary = ", ".join(flagged) if flagged else "none"
    print(f"mapped {len(points)} samples -> {out} (flagged subgroups: {summary})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _require(args, "data", "out")
    started = time.perf_counter()
    record = _Inputs()
    report = _evaluate(args, record)
    ranking = rank_scenarios(report.matrix(), report.scenario_names)
    matrix = correlation_matrix(ranking)
    manifest = _manifest(args, record, started)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json_report(out / "report.json", manifest, {"report": report.to_json()})
    _write_csv_report(out / "metrics.csv", manifest, report.to_csv())
    _write_csv_report(out / "ranking.csv", manifest, ranking_to_csv(ranking))
    _write_csv_report(out / "correlation.csv", manifest, correlation_to_csv(matrix))
    (out / "correlation.svg").write_text(
        _correlation_svg(matrix, manifest, args.reproducible), encoding="utf-8"
    )
    _write_json(out / "manifest.json", manifest.sidecar_json())
    print(
        f"report bundle: {len(report.metric_names())} metrics,"
        f" {len(ranking.metrics)} ranked, correlation {len(matrix.metrics)}x"
        f"{len(matrix.metrics)} -> {out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and config file


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _add_metric_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="dataset directory (table.csv, schema.json, ...)")
    parser.add_argument(
        "--features",
        default="pixel,hog",
        help='comma list of feature sources: pixel, hog, or name=path.divt (default "pixel,hog")',
    )
    parser.add_argument("--ref-scenario", default=None, help="override the reference scenario")
    parser.add_argument("--probs", default=None, help="DIVT class-probability rows (enables IS)")
    parser.add_argument("--embeddings", default=None, help="DIVT text-embedding rows (enables semantic)")
    parser.add_argument("--subsample-fraction", type=float, default=0.10)
    parser.add_argument("--subsample-repeats", type=int, default=5)
    parser.add_argument("--bootstrap", action="store_true", help="attach percentile CIs")
    parser.add_argument("--bootstrap-reps", type=int, default=10)
    parser.add_argument("--level", type=float, default=0.95, help="CI level")


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="governs all randomness")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker pool bound (default: machine parallelism; DIVSCORE_THREADS is the fallback)",
    )
    common.add_argument(
        "--config", default=None, help="INI file whose [divscore]/[<command>] keys replicate flags"
    )
    common.add_argument(
        "--reproducible",
        action="store_true",
        help="suppress wall-clock fields so artifacts are byte-stable",
    )

    parser = _Parser(prog="divscore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    by_command: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("gen-toy", parents=[common], help="generate the synthetic perturbation dataset")
    p.add_argument("--n", type=int, default=100, help="base glyphs per perturbation pool")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen_toy)
    by_command["gen-toy"] = p

    p = sub.add_parser("extract", parents=[common], help="compute pixel/hog features into a DIVT file")
    p.add_argument("--data", help="dataset directory containing images.idx")
    p.add_argument("--features", choices=("pixel", "hog"), default="hog")
    p.add_argument("--out", help="output .divt path")
    p.set_defaults(func=cmd_extract)
    by_command["extract"] = p

    p = sub.add_parser("metrics", parents=[common], help="score every scenario with every applicable metric")
    _add_metric_flags(p)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", default=None, help="also write the metric table as CSV")
    p.set_defaults(func=cmd_metrics)
    by_command["metrics"] = p

    p = sub.add_parser("rank", parents=[common], help="rank scenarios per metric from a report")
    p.add_argument("--report", help="report JSON from `metrics`")
    p.add_argument("--out", help="ranking CSV path")
    p.set_defaults(func=cmd_rank)
    by_command["rank"] = p

    p = sub.add_parser("correlate", parents=[common], help="rank correlation matrix across metrics")
    p.add_argument("--report", help="report JSON from `metrics`")
    p.add_argument("--out", help="comma list of .csv/.svg outputs")
    p.set_defaults(func=cmd_correlate)
    by_command["correlate"] = p

    p = sub.add_parser("train", parents=[common], help="cross-validated reference classifier")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--features", default="hog", help="one feature source (pixel, hog, or name=path.divt)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_train)
    by_command["train"] = p

    p = sub.add_parser("datamap", parents=[common], help="confidence/variability map from a probability log")
    p.add_argument("--log", help="prob_log.csv from `train`")
    p.add_argument("--data", default=None, help="dataset directory (attaches subgroup tags)")
    p.add_argument("--tag", default=None, help="tag to split subgroups on")
    p.add_argument("--threshold", type=float, default=1.5, help="IQR multiplier for flagging")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_datamap)
    by_command["datamap"] = p

    p = sub.add_parser("report", parents=[common], help="metrics + ranking + correlation bundle")
    _add_metric_flags(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)
    by_command["report"] = p

    return parser, by_command


def _read_config(path: str, command: str, subparser: argparse.ArgumentParser) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    ini = configparser.ConfigParser()
    ini.optionxform = str
    try:
        ini.read_string(p.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise SchemaError(f"{p}: {exc}") from None

    converters: dict[str, object] = {}
    for action in subparser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        if isinstance(action, argparse._StoreTrueAction):
            converters[action.dest] = _parse_bool
        else:
            converters[action.dest] = action.type or str

    values: dict[str, object] = {}
    for section in ("divscore", command):
        if not ini.has_section(section):
            continue
        for key, raw in ini.items(section):
            dest = key.replace("-", "_")
            if dest == "config":
                continue
            if dest not in converters:
                raise SchemaError(f"{p}: unknown option {key!r} for {command}")
            try:
                values[dest] = converters[dest](raw)
            except ValueError:
                raise SchemaError(f"{p}: bad value for {key!r}: {raw!r}") from None
    return values


def main(argv: list[str] | None = None) -> int:
    parser, by_command = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            defaults = _read_config(args.config, args.command, by_command[args.command])
            by_command[args.command].set_defaults(**defaults)
            args = parser.parse_args(argv)  # explicit flags still win
        return args.func(args)
    except UsageError as exc:
        print(f"divscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, SchemaError, ValueError) as exc:
        print(f"divscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"divscore: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
