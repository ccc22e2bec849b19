"""End-to-end tests for the command-line pipeline."""

import json
import shutil

import numpy as np
import pytest

from divscore.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main
from divscore.dataio import read_divt_file
from divscore.datamap import points_from_csv
from divscore.features import hog_dim


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy") / "data"
    assert main(["gen-toy", "--n", "50", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def report_json(toy_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("rep") / "report.json"
    code = main(["metrics", "--data", str(toy_dir), "--features", "hog", "--out", str(out)])
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def train_dir(toy_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("train") / "run"
    code = main(
        ["train", "--data", str(toy_dir), "--features", "hog",
         "--folds", "5", "--max-epochs", "10", "--out", str(out)]
    )
    assert code == EXIT_OK
    return out


# ---------------------------------------------------------------------------
# gen-toy / extract


def test_gen_toy_writes_dataset_files(toy_dir):
    for name in ("images.idx", "table.csv", "captions.jsonl", "scenarios.cfg",
                 "schema.json", "manifest.json"):
        assert (toy_dir / name).is_file(), name


def test_gen_toy_manifest_sidecar(toy_dir):
    manifest = json.loads((toy_dir / "manifest.json").read_text())
    assert manifest["command"] == "gen-toy"
    assert manifest["seed"] == 7
    assert manifest["version"]
    assert "wall_time_s" in manifest  # volatile field lives only in sidecars


def test_gen_toy_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen-toy", "--n", "10", "--seed", "5", "--out", str(a)]) == EXIT_OK
    assert main(["gen-toy", "--n", "10", "--seed", "5", "--out", str(b)]) == EXIT_OK
    assert (a / "images.idx").read_bytes() == (b / "images.idx").read_bytes()
    assert (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()


def test_extract_hog_dimensions(toy_dir, tmp_path):
    out = tmp_path / "hog.divt"
    code = main(["extract", "--data", str(toy_dir), "--features", "hog", "--out", str(out)])
    assert code == EXIT_OK
    matrix = read_divt_file(out)
    assert matrix.shape == (250, hog_dim(28, 28))


# ---------------------------------------------------------------------------
# metrics


def test_metrics_report_structure(report_json):
    obj = json.loads(report_json.read_text())
    assert set(obj) == {"manifest", "report"}
    report = obj["report"]
    assert len(report["scenarios"]) == 9
    assert report["reference"] == "plain"
    assert sorted(report["metrics"]) == ["FID_hog", "RougeL", "VS_hog", "metadata"]
    for entry in report["metrics"].values():
        assert entry["direction"] in ("higher_better", "lower_better")
        assert set(entry["scenarios"]) == set(report["scenarios"])


def test_metrics_manifest_digests_inputs(report_json, toy_dir):
    manifest = json.loads(report_json.read_text())["manifest"]
    recorded = set(manifest["inputs"])
    for name in ("table.csv", "schema.json", "captions.jsonl", "scenarios.cfg", "images.idx"):
        assert any(path.endswith(name) for path in recorded), name
    for digest in manifest["inputs"].values():
        assert len(digest) == 64
    assert "wall_time_s" not in manifest  # reports stay byte-stable


def test_metrics_csv_embeds_manifest(toy_dir, tmp_path):
    out = tmp_path / "r.json"
    csv_out = tmp_path / "r.csv"
    code = main(["metrics", "--data", str(toy_dir), "--features", "hog",
                 "--out", str(out), "--csv", str(csv_out)])
    assert code == EXIT_OK
    lines = csv_out.read_text().splitlines()
    assert lines[0].startswith("# manifest command=metrics")
    header = next(line for line in lines if not line.startswith("#"))
    assert header.startswith("metric,direction,plain,")


def test_metrics_byte_identical_for_identical_flags(toy_dir, tmp_path):
    out = tmp_path / "r.json"
    argv = ["metrics", "--data", str(toy_dir), "--features", "hog", "--out", str(out)]
    assert main(argv) == EXIT_OK
    first = out.read_bytes()
    assert main(argv) == EXIT_OK
    assert out.read_bytes() == first


def test_metrics_payload_thread_invariant(toy_dir, tmp_path):
    reports = []
    for threads in ("1", "3"):
        out = tmp_path / f"r{threads}.json"
        code = main(["metrics", "--data", str(toy_dir), "--features", "hog",
                     "--threads", threads, "--out", str(out)])
        assert code == EXIT_OK
        reports.append(json.loads(out.read_text())["report"])
    assert reports[0] == reports[1]


def test_metrics_with_probs_adds_is(toy_dir, train_dir, tmp_path):
    out = tmp_path / "r.json"
    code = main(["metrics", "--data", str(toy_dir), "--features", "hog",
                 "--probs", str(train_dir / "probs.divt"), "--out", str(out)])
    assert code == EXIT_OK
    metrics = json.loads(out.read_text())["report"]["metrics"]
    assert "IS" in metrics


def test_metrics_env_thread_fallback(toy_dir, tmp_path, monkeypatch):
    out = tmp_path / "r.json"
    monkeypatch.setenv("DIVSCORE_THREADS", "2")
    code = main(["metrics", "--data", str(toy_dir), "--features", "hog", "--out", str(out)])
    assert code == EXIT_OK
    monkeypatch.setenv("DIVSCORE_THREADS", "zebra")
    assert main(["metrics", "--data", str(toy_dir), "--features", "hog",
                 "--out", str(out)]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# rank / correlate


def test_rank_writes_csv(report_json, tmp_path):
    out = tmp_path / "rank.csv"
    assert main(["rank", "--report", str(report_json), "--out", str(out)]) == EXIT_OK
    lines = [line for line in out.read_text().splitlines() if not line.startswith("#")]
    assert lines[0].split(",")[0] == "metric"
    assert len(lines) == 1 + 4  # four metrics ranked


def test_correlate_symmetric_unit_diagonal(report_json, tmp_path):
    csv_out = tmp_path / "corr.csv"
    svg_out = tmp_path / "corr.svg"
    code = main(["correlate", "--report", str(report_json),
                 "--out", f"{csv_out},{svg_out}"])
    assert code == EXIT_OK
    lines = [line for line in csv_out.read_text().splitlines() if not line.startswith("#")]
    names = lines[0].split(",")[1:]
    values = np.array([[float(cell) for cell in line.split(",")[1:]] for line in lines[1:]])
    assert values.shape == (len(names), len(names))
    assert np.allclose(values, values.T, equal_nan=True)
    assert np.allclose(np.diag(values), 1.0)
    svg = svg_out.read_text()
    assert svg.startswith("<svg")
    assert "manifest command=correlate" in svg


def test_correlate_reproducible_svg_identical(report_json, tmp_path):
    out = tmp_path / "corr.svg"
    argv = ["correlate", "--report", str(report_json), "--out", str(out), "--reproducible"]
    assert main(argv) == EXIT_OK
    first = out.read_bytes()
    assert b"generated" not in first
    assert main(argv) == EXIT_OK
    assert out.read_bytes() == first


def test_correlate_default_svg_has_timestamp(report_json, tmp_path):
    out = tmp_path / "corr.svg"
    assert main(["correlate", "--report", str(report_json), "--out", str(out)]) == EXIT_OK
    assert "<!-- generated " in out.read_text()


def test_correlate_rejects_unknown_extension(report_json, tmp_path):
    code = main(["correlate", "--report", str(report_json),
                 "--out", str(tmp_path / "corr.pdf")])
    assert code == EXIT_USAGE


# ---------------------------------------------------------------------------
# train / datamap


def test_train_artifacts(toy_dir, train_dir):
    for name in ("folds.csv", "probs.divt", "prob_log.csv", "summary.json"):
        assert (train_dir / name).is_file(), name
    probs = read_divt_file(train_dir / "probs.divt")
    assert probs.shape == (250, 10)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)
    summary = json.loads((train_dir / "summary.json").read_text())["training"]
    assert 0.5 < summary["mean_val_auc"] <= 1.0
    assert len(summary["folds"]) == 5


def test_datamap_artifacts(toy_dir, train_dir, tmp_path):
    out = tmp_path / "maps"
    code = main(["datamap", "--log", str(train_dir / "prob_log.csv"),
                 "--data", str(toy_dir), "--tag", "perturbation", "--out", str(out)])
    assert code == EXIT_OK
    points = points_from_csv((out / "datamap_points.csv").read_text())
    assert len(points) == 250  # cross-validation tracks every sample once
    flags = json.loads((out / "flags.json").read_text())
    assert flags["tag"] == "perturbation"
    assert isinstance(flags["flagged"], list)
    svg = (out / "datamap.svg").read_text()
    assert "perturbation=" in svg
    assert (out / "datamap_density.csv").is_file()


def test_datamap_unknown_tag_is_validation_error(toy_dir, train_dir, tmp_path):
    code = main(["datamap", "--log", str(train_dir / "prob_log.csv"),
                 "--data", str(toy_dir), "--tag", "scanner", "--out", str(tmp_path / "m")])
    assert code == EXIT_USAGE


# ---------------------------------------------------------------------------
# report bundle


def test_report_bundle(toy_dir, tmp_path):
    out = tmp_path / "bundle"
    code = main(["report", "--data", str(toy_dir), "--features", "pixel,hog",
                 "--out", str(out), "--reproducible"])
    assert code == EXIT_OK
    for name in ("report.json", "metrics.csv", "ranking.csv",
                 "correlation.csv", "correlation.svg", "manifest.json"):
        assert (out / name).is_file(), name
    metrics = json.loads((out / "report.json").read_text())["report"]["metrics"]
    assert len(metrics) >= 6


# ---------------------------------------------------------------------------
# exit codes and config file


def test_missing_data_dir_is_io_error(tmp_path):
    code = main(["metrics", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "r.json")])
    assert code == EXIT_IO


def test_missing_images_is_io_error_with_hint(toy_dir, tmp_path, capsys):
    stripped = tmp_path / "noimg"
    shutil.copytree(toy_dir, stripped)
    (stripped / "images.idx").unlink()
    code = main(["metrics", "--data", str(stripped), "--out", str(tmp_path / "r.json")])
    assert code == EXIT_IO
    assert "images.idx" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(toy_dir, tmp_path):
    code = main(["metrics", "--data", str(toy_dir), "--out", str(tmp_path / "r.json"),
                 "--bogus"])
    assert code == EXIT_USAGE


def test_missing_required_flag_is_usage_error():
    assert main(["gen-toy"]) == EXIT_USAGE


def test_bad_ref_scenario_is_usage_error(toy_dir, tmp_path):
    code = main(["metrics", "--data", str(toy_dir), "--features", "hog",
                 "--ref-scenario", "nope", "--out", str(tmp_path / "r.json")])
    assert code == EXIT_USAGE


def test_config_file_supplies_defaults(tmp_path):
    out = tmp_path / "cfgdata"
    config = tmp_path / "run.ini"
    config.write_text(f"[divscore]\nseed = 3\n\n[gen-toy]\nn = 12\nout = {out}\n")
    assert main(["gen-toy", "--config", str(config)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3


def test_config_file_flag_overrides(tmp_path):
    out = tmp_path / "cfgdata"
    config = tmp_path / "run.ini"
    config.write_text(f"[divscore]\nseed = 3\n\n[gen-toy]\nn = 12\nout = {out}\n")
    assert main(["gen-toy", "--config", str(config), "--seed", "9"]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9


def test_config_file_unknown_key_is_usage_error(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[gen-toy]\nbogus = 1\n")
    assert main(["gen-toy", "--config", str(config)]) == EXIT_USAGE


def test_config_file_missing_is_io_error(tmp_path):
    code = main(["gen-toy", "--config", str(tmp_path / "none.ini"),
                 "--out", str(tmp_path / "d")])
    assert code == EXIT_IO
