"""Tests for the synthetic digit generator and its perturbations."""

import json

import numpy as np
import pytest

from divscore.dataio import TableSchema, load_scenarios, load_table, read_idx_images
from divscore.divmetrics import lexical_diversity
from divscore.toygen import (
    FOREGROUND_THRESHOLD,
    KINDS,
    METADATA_COLUMNS,
    Morphometrics,
    base_glyphs,
    build_scenarios,
    caption,
    morphometrics,
    perturb,
    write_dataset,
)


def foreground_area(image):
    return int((image >= FOREGROUND_THRESHOLD).sum())


# ---------------------------------------------------------------------------
# base_glyphs


def test_base_glyphs_one_per_class():
    images, labels = base_glyphs(10, seed=1)
    assert images.shape == (10, 28, 28)
    assert images.dtype == np.uint8
    assert labels.tolist() == list(range(10))


def test_base_glyphs_same_seed_identical():
    first, labels_a = base_glyphs(25, seed=9)
    second, labels_b = base_glyphs(25, seed=9)
    assert np.array_equal(first, second)
    assert np.array_equal(labels_a, labels_b)


def test_base_glyphs_different_seeds_differ():
    first, _ = base_glyphs(10, seed=0)
    second, _ = base_glyphs(10, seed=1)
    assert not np.array_equal(first, second)


def test_base_glyphs_prefix_stable():
    # Per-sample seeding means a longer stack starts with the shorter one.
    short, _ = base_glyphs(5, seed=4)
    long, _ = base_glyphs(15, seed=4)
    assert np.array_equal(long[:5], short)


def test_base_glyphs_foreground_over_1000_samples():
    images, _ = base_glyphs(1000, seed=0)
    areas = (images >= FOREGROUND_THRESHOLD).reshape(len(images), -1).sum(axis=1)
    assert int(areas.min()) > 20


def test_base_glyphs_needs_positive_n():
    with pytest.raises(ValueError, match="n >= 1"):
        base_glyphs(0, seed=0)


# ---------------------------------------------------------------------------
# perturb


def glyph(seed=3, index=2):
    images, _ = base_glyphs(index + 1, seed=seed)
    return images[index]


def test_perturb_plain_is_identity():
    image = glyph()
    out = perturb(image, "plain", seed=123)
    assert np.array_equal(out, image)
    assert out is not image  # caller may mutate the result freely


def test_perturb_deterministic_per_seed():
    image = glyph()
    for kind in KINDS:
        first = perturb(image, kind, seed=7)
        second = perturb(image, kind, seed=7)
        assert np.array_equal(first, second), kind


def test_perturb_does_not_mutate_input():
    image = glyph()
    before = image.copy()
    for kind in KINDS:
        perturb(image, kind, seed=0)
    assert np.array_equal(image, before)


def test_perturb_area_ordering_over_500_triples():
    images, _ = base_glyphs(500, seed=11)
    thin = np.array([foreground_area(perturb(x, "thin", i)) for i, x in enumerate(images)])
    plain = np.array([foreground_area(x) for x in images])
    thick = np.array([foreground_area(perturb(x, "thick", i)) for i, x in enumerate(images)])
    assert thin.mean() < plain.mean() < thick.mean()


def test_perturb_fracture_changes_at_most_60_pixels():
    images, _ = base_glyphs(200, seed=5)
    for i, image in enumerate(images):
        changed = int((perturb(image, "fracture", i) != image).sum())
        assert 0 < changed <= 60


def test_perturb_fracture_only_removes_intensity():
    image = glyph()
    out = perturb(image, "fracture", seed=2)
    assert (out <= image).all()


def test_perturb_swelling_touches_only_a_disc():
    image = glyph()
    out = perturb(image, "swelling", seed=8)
    changed = np.argwhere(out != image)
    assert len(changed) > 0
    # All changed pixels fit in a disc of the declared radius.
    center = changed.mean(axis=0)
    radii = np.hypot(*(changed - center).T)
    assert radii.max() <= 2 * 7.0


def test_perturb_empty_foreground_errors():
    blank = np.zeros((28, 28), dtype=np.uint8)
    for kind in KINDS:
        with pytest.raises(ValueError, match="empty foreground"):
            perturb(blank, kind, seed=0)


def test_perturb_rejects_unknown_kind_and_bad_input():
    with pytest.raises(ValueError, match="unknown perturbation"):
        perturb(glyph(), "blur", seed=0)
    with pytest.raises(ValueError, match="uint8"):
        perturb(glyph().astype(np.float64), "plain", seed=0)


# ---------------------------------------------------------------------------
# caption


def test_caption_examples():
    assert caption(7, "plain") == "Image of a handwritten plain seven"
    assert caption(9, "thin") == "Image of a handwritten thin nine"


def test_caption_adjectives():
    assert caption(0, "thick") == "Image of a handwritten thick zero"
    assert caption(4, "fracture") == "Image of a handwritten fractured four"
    assert caption(6, "swelling") == "Image of a handwritten swollen six"


def test_caption_constant_per_pair():
    assert caption(3, "thin") == caption(3, "thin")


def test_caption_label_range():
    with pytest.raises(ValueError, match="label"):
        caption(10, "plain")


# ---------------------------------------------------------------------------
# morphometrics


def test_morphometrics_solid_square():
    image = np.zeros((28, 28), dtype=np.uint8)
    image[5:9, 5:9] = 255
    m = morphometrics(image)
    assert m.area == 16.0
    assert m.width == 4.0
    assert m.height == 4.0


def test_morphometrics_horizontal_line_is_its_own_skeleton():
    image = np.zeros((28, 28), dtype=np.uint8)
    image[14, 4:14] = 255
    m = morphometrics(image)
    assert m.length == 10.0
    assert m.thickness == pytest.approx(1.0)
    assert m.slant == pytest.approx(0.0)


def test_morphometrics_slant_sign():
    # A stroke whose top is to the right of its bottom leans right.
    right = np.zeros((28, 28), dtype=np.uint8)
    left = np.zeros((28, 28), dtype=np.uint8)
    for step in range(16):
        right[6 + step, 20 - step] = 255
        left[6 + step, 6 + step] = 255
    assert morphometrics(right).slant > 0
    assert morphometrics(left).slant < 0


def test_morphometrics_area_at_least_length():
    images, _ = base_glyphs(50, seed=2)
    for i, image in enumerate(images):
        for kind in KINDS:
            m = morphometrics(perturb(image, kind, i))
            assert m.area >= m.length >= 0
            assert m.width <= 28 and m.height <= 28


def test_morphometrics_thick_batch_thicker_than_plain():
    images, _ = base_glyphs(60, seed=11)
    plain = np.mean([morphometrics(x).thickness for x in images])
    thick = np.mean([morphometrics(perturb(x, "thick", i)).thickness for i, x in enumerate(images)])
    assert thick > plain


def test_morphometrics_empty_foreground_errors():
    with pytest.raises(ValueError, match="empty foreground"):
        morphometrics(np.zeros((28, 28), dtype=np.uint8))


def test_morphometrics_validates_area_length_order():
    with pytest.raises(ValueError, match="area >= length"):
        Morphometrics(area=5.0, length=9.0, thickness=1.0, slant=0.0, width=3.0, height=3.0)


# ---------------------------------------------------------------------------
# build_scenarios


def test_build_scenarios_cardinality():
    dataset = build_scenarios(10, seed=3)
    assert dataset.images.shape == (50, 28, 28)
    assert dataset.table.n_samples == 50
    names = [line[1:-1] for line in dataset.config_text.splitlines()
             if line.startswith("[") and line != "[options]"]
    assert len(names) == 9


def test_build_scenarios_group_ties_variants():
    dataset = build_scenarios(10, seed=3)
    table = dataset.table
    by_group = {}
    for i, gid in enumerate(table.group_ids):
        by_group.setdefault(gid, []).append(i)
    assert len(by_group) == 10
    for members in by_group.values():
        kinds = sorted(table.tags["perturbation"][i] for i in members)
        assert kinds == sorted(KINDS)
        assert len({int(table.labels[i]) for i in members}) == 1


def test_build_scenarios_captions_and_metadata_attached():
    dataset = build_scenarios(10, seed=0)
    table = dataset.table
    assert table.metadata.shape == (50, len(METADATA_COLUMNS))
    for i in range(table.n_samples):
        kind = table.tags["perturbation"][i]
        assert table.texts[i] == caption(int(table.labels[i]), kind)
        m = morphometrics(dataset.images[table.image_index[i]])
        assert np.allclose(table.metadata[i], m.as_row())


def test_build_scenarios_minimum_pool_size():
    with pytest.raises(ValueError, match="n_per_kind"):
        build_scenarios(9, seed=0)


def test_written_dataset_round_trips_through_loaders(tmp_path):
    dataset = build_scenarios(12, seed=1)
    paths = write_dataset(tmp_path, dataset)

    stack = read_idx_images(paths["images"].read_bytes())
    assert np.array_equal(stack, dataset.images)

    schema = TableSchema.from_json(json.loads(paths["schema"].read_text()))
    table = load_table(paths["table"], schema, jsonl_path=paths["texts"])
    assert table.sample_ids == dataset.table.sample_ids
    assert np.array_equal(table.labels, dataset.table.labels)
    assert np.allclose(table.metadata, dataset.table.metadata)
    assert table.texts == dataset.table.texts

    scenarios = load_scenarios(paths["scenarios"], table)
    assert scenarios.reference == "plain"
    assert len(scenarios.names) == 9

    sizes = {name: len(scenarios.indices[name]) for name in scenarios.names}
    for kind in KINDS:
        assert sizes[kind] == 12
    plain_pool = set(scenarios.indices["plain"].tolist())
    for kind in ("thin", "thick", "fracture", "swelling"):
        union = set(scenarios.indices[f"plain_{kind}"].tolist())
        assert sizes[f"plain_{kind}"] == 2 * 12
        assert plain_pool < union
        assert union - plain_pool == set(scenarios.indices[kind].tolist())


def test_union_scenarios_lexically_more_diverse(tmp_path):
    dataset = build_scenarios(10, seed=6)
    paths = write_dataset(tmp_path, dataset)
    schema = TableSchema.from_json(json.loads(paths["schema"].read_text()))
    table = load_table(paths["table"], schema, jsonl_path=paths["texts"])
    scenarios = load_scenarios(paths["scenarios"], table)

    scores = {}
    for name in scenarios.names:
        texts = [table.texts[i] for i in scenarios.indices[name]]
        scores[name] = lexical_diversity(texts).value
    singles = [scores[k] for k in KINDS]
    unions = [scores[n] for n in scenarios.names if n not in KINDS]
    assert max(unions) < min(singles)
