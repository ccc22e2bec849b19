"""Tests for data-map statistics, densities, and subgroup flagging."""

import numpy as np
import pytest

from divscore.datamap import (
    DataMapPoint,
    cell_area,
    confidence_centers,
    datamap_stats,
    density_grid,
    flag_outlier_subgroups,
    grid_to_csv,
    points_from_csv,
    points_to_csv,
    subgroup_maps,
    variability_centers,
)
from divscore.trainer import EpochProbLog


def make_point(sid, conf, var, **tags):
    return DataMapPoint(
        sample_id=sid,
        confidence=conf,
        variability=var,
        subgroup_tags=tuple(sorted(tags.items())),
    )


# ---------------------------------------------------------------------------
# datamap_stats


def test_stats_constant_series():
    points = datamap_stats({"a": np.array([0.9, 0.9, 0.9])})
    assert points[0].confidence == pytest.approx(0.9)
    assert points[0].variability == pytest.approx(0.0)


def test_stats_extreme_series():
    points = datamap_stats({"a": np.array([0.0, 1.0])})
    assert points[0].confidence == pytest.approx(0.5)
    assert points[0].variability == pytest.approx(0.5)  # population std


def test_stats_single_epoch_zero_variability():
    log = EpochProbLog(
        tracked_ids=["a", "b"], probs=np.array([[0.3, 0.8]]), stopped_epoch=1, best_epoch=1
    )
    points = datamap_stats(log)
    assert all(p.variability == 0.0 for p in points)


def test_stats_empty_log_errors():
    with pytest.raises(ValueError, match="empty"):
        datamap_stats({})
    with pytest.raises(ValueError, match="empty"):
        datamap_stats({"a": np.array([])})


def test_stats_epoch_reordering_invariant():
    rng = np.random.default_rng(0)
    series = rng.uniform(size=12)
    a = datamap_stats({"s": series})[0]
    b = datamap_stats({"s": series[::-1].copy()})[0]
    assert a.confidence == b.confidence
    assert a.variability == b.variability


def test_stats_duplicated_epochs_leave_points_unchanged():
    rng = np.random.default_rng(1)
    series = rng.uniform(size=7)
    a = datamap_stats({"s": series})[0]
    b = datamap_stats({"s": np.concatenate([series, series])})[0]
    assert b.confidence == pytest.approx(a.confidence)
    assert b.variability == pytest.approx(a.variability)


def test_stats_variability_bounded():
    rng = np.random.default_rng(2)
    for trial in range(20):
        series = rng.uniform(size=rng.integers(1, 30))
        p = datamap_stats({"s": series})[0]
        assert 0.0 <= p.variability <= 0.5


def test_stats_attaches_tags():
    points = datamap_stats(
        {"a": np.array([0.5])}, tags_by_id={"a": {"scanner": "GE", "sex": "F"}}
    )
    assert points[0].tag("scanner") == "GE"
    assert points[0].tag("sex") == "F"


# ---------------------------------------------------------------------------
# subgroup_maps


def test_subgroup_partition_preserves_counts():
    points = [make_point(f"s{i}", 0.5, 0.1, scanner="A" if i < 4 else "B") for i in range(10)]
    groups = subgroup_maps(points, "scanner")
    assert sorted(groups) == ["A", "B"]
    assert len(groups["A"]) + len(groups["B"]) == 10
    ids = {p.sample_id for members in groups.values() for p in members}
    assert ids == {p.sample_id for p in points}  # disjoint union


def test_subgroup_single_value():
    points = [make_point(f"s{i}", 0.5, 0.1, kind="x") for i in range(3)]
    assert list(subgroup_maps(points, "kind")) == ["x"]


def test_subgroup_missing_tag_errors():
    points = [make_point("s0", 0.5, 0.1, kind="x"), make_point("s1", 0.5, 0.1)]
    with pytest.raises(ValueError, match="missing"):
        subgroup_maps(points, "kind")


# ---------------------------------------------------------------------------
# density_grid


def test_density_two_far_points_two_maxima():
    points = [make_point("a", 0.2, 0.1), make_point("b", 0.8, 0.4)]
    grid = density_grid(points)
    conf_c = confidence_centers()
    var_c = variability_centers()

    def at(c, v):
        return grid.density[np.argmin(np.abs(conf_c - c)), np.argmin(np.abs(var_c - v))]

    midpoint = at(0.5, 0.25)
    assert at(0.2, 0.1) > midpoint
    assert at(0.8, 0.4) > midpoint


def test_density_identical_points_spike_not_error():
    points = [make_point(f"s{i}", 0.43, 0.21) for i in range(5)]
    grid = density_grid(points)
    assert grid.bandwidth == (pytest.approx(1e-3), pytest.approx(1e-3))
    i, j = np.unravel_index(np.argmax(grid.density), grid.density.shape)
    assert confidence_centers()[i] == pytest.approx(0.43, abs=0.01)
    assert variability_centers()[j] == pytest.approx(0.21, abs=0.005)
    assert grid.density.sum() > 0  # integral > 0 with ≥ 1 point


def test_density_integrates_to_one_for_interior_mass():
    rng = np.random.default_rng(3)
    points = [
        make_point(f"s{i}", float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.15, 0.35)))
        for i in range(60)
    ]
    grid = density_grid(points)
    integral = grid.density.sum() * cell_area()
    assert integral == pytest.approx(1.0, rel=0.05)


def test_density_scott_bandwidth():
    rng = np.random.default_rng(4)
    conf = rng.uniform(0.2, 0.8, size=40)
    var = rng.uniform(0.05, 0.45, size=40)
    points = [make_point(f"s{i}", float(c), float(v)) for i, (c, v) in enumerate(zip(conf, var))]
    grid = density_grid(points)
    assert grid.bandwidth[0] == pytest.approx(40 ** (-1 / 6) * conf.std())
    assert grid.bandwidth[1] == pytest.approx(40 ** (-1 / 6) * var.std())


# ---------------------------------------------------------------------------
# flag_outlier_subgroups


def test_flag_forced_separation():
    points = [make_point(f"lo{i}", 0.1, 0.05, scanner="X") for i in range(3)]
    points += [make_point(f"hi{i}", 0.9 - 0.001 * i, 0.05, scanner=("A" if i % 2 else "B")) for i in range(20)]
    assert flag_outlier_subgroups(points, "scanner", threshold=1.5) == ["X"]


def test_flag_homogeneous_nothing():
    points = [
        make_point(f"s{i}", 0.8 + 0.01 * (i % 3), 0.05, scanner="A" if i < 5 else "B")
        for i in range(10)
    ]
    assert flag_outlier_subgroups(points, "scanner", threshold=1.5) == []


def test_flag_infinite_threshold_nothing():
    points = [make_point(f"lo{i}", 0.1, 0.05, scanner="X") for i in range(3)]
    points += [make_point(f"hi{i}", 0.9, 0.05, scanner="A") for i in range(7)]
    assert flag_outlier_subgroups(points, "scanner", threshold=np.inf) == []


def test_flag_needs_two_values():
    points = [make_point("a", 0.5, 0.1, scanner="A"), make_point("b", 0.6, 0.1, scanner="A")]
    with pytest.raises(ValueError, match="2 subgroup values"):
        flag_outlier_subgroups(points, "scanner")


# ---------------------------------------------------------------------------
# CSV round trips


def test_points_csv_round_trip():
    points = [
        make_point("a", 0.25, 0.125, scanner="GE", sex="F"),
        make_point("b", 0.75, 0.0, scanner="Philips", sex="M"),
    ]
    again = points_from_csv(points_to_csv(points))
    assert again == points


def test_grid_csv_shape():
    points = [make_point("a", 0.2, 0.1), make_point("b", 0.8, 0.4)]
    text = grid_to_csv(density_grid(points))
    lines = text.strip().split("\n")
    assert len(lines) == 101
    assert len(lines[1].split(",")) == 101
