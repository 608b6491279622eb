"""End-to-end acceptance checks, one test per shipped guarantee.

Each test states its tolerance inline. The final test documents which
published accuracy figures are deliberately NOT reproduced here.
"""

import filecmp
import json
import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from test_detector import naive_dbscan, partitions_equal
from test_metrics import nested_average_accuracy, random_prediction_set
from test_profile import brute_force_border

from potsim.dataset import N_SPLITS, N_TRAIN, N_VAL, fig2_catalog, make_splits, mol_prior
from potsim.detector import DBSCAN_EPS, DBSCAN_MIN_PTS, dbscan, detect_batch
from potsim.fracture import FractureEvent, apply_fracture
from potsim.generate import RandomConfig, bundled_profiles, generate_dataset
from potsim.mesh import revolve
from potsim.metrics import (
    aggregate,
    by_split,
    confusion,
    acc_single,
    major_confusions,
    min_train_size,
    uniform_prior,
    vc_bound,
    weights,
)
from potsim.profile import Bitmap, ProfileCurve, detect_border
from potsim.render import VESSEL_CLASSES


def test_01_border_formula_matches_brute_force():
    """500 random bitmaps, 8x8..64x64: exact match, detection < 1 s."""
    rng = np.random.default_rng(0)
    bitmaps = []
    for _ in range(500):
        h, w = rng.integers(8, 65, size=2)
        bitmaps.append(Bitmap((rng.uniform(size=(h, w)) < 0.4).astype(np.uint8)))
    t0 = time.perf_counter()
    results = [detect_border(b) for b in bitmaps]
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    for bmp, got in zip(bitmaps, results):
        assert got == brute_force_border(bmp.pixels)


def test_02_fracture_mask_matches_brute_force():
    """200 random (mesh, break) pairs, meshes up to 50k vertices, < 10 s."""
    rng = np.random.default_rng(1)

    def random_mesh(n_points, segments):
        t = np.linspace(0.0, 1.0, n_points)
        radii = 1.0 + 0.5 * rng.uniform(size=n_points)
        pts = np.column_stack([radii, 3.0 * t])
        return revolve(ProfileCurve(pts), segments=segments)

    # a few large meshes up to the 50k-vertex bound, the rest small
    shapes = [(100, 500)] * 2 + [
        (int(rng.integers(5, 20)), int(rng.integers(8, 64))) for _ in range(198)
    ]
    pairs = []
    for n_points, segments in shapes:
        mesh = random_mesh(n_points, segments)
        center = tuple(rng.uniform(-2, 4, size=3))
        radius = float(rng.uniform(0.3, 2.0))
        rescues = tuple(
            tuple(rng.uniform(-2, 4, size=3)) for _ in range(int(rng.integers(0, 5)))
        )
        pairs.append((mesh, FractureEvent(center, radius, rescues, 0.5, 1.5)))
    assert max(len(m.vertices) for m, _ in pairs) >= 49_000

    t0 = time.perf_counter()
    masks = [apply_fracture(mesh, event).copy() for mesh, event in pairs]
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0

    for (mesh, event), got in zip(pairs, masks):
        p = np.asarray(event.center)
        for v, flag in zip(mesh.vertices, got):
            d_p = math.dist(v, p)
            expect = d_p <= event.radius and all(
                d_p < math.dist(v, q) for q in event.rescue_points
            )
            assert flag == expect


def test_03_revolve_rotational_symmetry():
    """50 random profiles, segments=128: rotating the vertex set by one
    segment step re-matches it within 1e-9."""
    rng = np.random.default_rng(2)
    step = 2.0 * np.pi / 128
    c, s = np.cos(step), np.sin(step)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    for _ in range(50):
        n = int(rng.integers(4, 30))
        pts = np.column_stack(
            [rng.uniform(0.2, 3.0, size=n), np.sort(rng.uniform(0.0, 4.0, size=n))]
        )
        mesh = revolve(ProfileCurve(pts), segments=128)
        rotated = mesh.vertices @ rot.T
        dist, _ = cKDTree(mesh.vertices).query(rotated)
        assert dist.max() < 1e-9


def test_04_dbscan_matches_naive_reference():
    """100 random feature sets (<= 900 points): identical partitions up to
    cluster relabeling, noise coinciding exactly."""
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(10, 901))
        # mixture of tight blobs and uniform background, like real features
        blobs = [
            rng.normal(rng.uniform(0, 1, size=4), 0.03, size=(n // 4, 4))
            for _ in range(2)
        ]
        x = np.vstack(blobs + [rng.uniform(0, 1, size=(n - 2 * (n // 4), 4))])
        got = dbscan(x, DBSCAN_EPS, DBSCAN_MIN_PTS)
        ref = naive_dbscan(x, DBSCAN_EPS, DBSCAN_MIN_PTS)
        assert partitions_equal(got, ref)


def test_05_metrics_match_oracles():
    """Accuracy vs triple-nested average within 1e-12 on 100 random sets;
    confusion rows sum to 1 +- 1e-9; variance matches Bessel within 1e-15."""
    rng = np.random.default_rng(4)
    classes = list(VESSEL_CLASSES)
    for _ in range(100):
        rows = random_prediction_set(rng, classes, n_splits=3)
        prior = uniform_prior(classes)
        for split_rows in by_split(rows).values():
            acc = acc_single(split_rows, weights(split_rows, prior))
            assert abs(acc - nested_average_accuracy(split_rows)) < 1e-12
        m = confusion(rows, classes=classes)
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-9)

    accs = rng.uniform(0.3, 1.0, size=20)
    summary = aggregate(accs)
    assert abs(summary["variance"] - np.var(accs, ddof=1)) < 1e-15


def test_06_sample_size_bound_reference_value():
    """h=4096, delta=0.05, gap=0.1: N within 1% of 35,238,500 and N is the
    first size at which the bound drops to the gap."""
    n, value = min_train_size(4096, 0.05, 0.1)
    assert abs(n - 35_238_500) / 35_238_500 < 0.01
    assert value <= 0.1
    assert vc_bound(n - 1, 4096, 0.05) > 0.1


def test_07_major_confusion_flags_reference_row():
    """A 9-class matrix with one row at diagonal 0.63 and a 0.14 cell flags
    exactly that cell (threshold: twice the uniform error share)."""
    classes = list(VESSEL_CLASSES)
    m = np.eye(9)
    i = classes.index("Dr18")
    j = classes.index("Dr36")
    m[i] = (1.0 - 0.63 - 0.14) / 7.0  # rest of the errors spread thin
    m[i, i] = 0.63
    m[i, j] = 0.14
    flags = major_confusions(m)
    assert flags == [(i, j)]


def test_08_collection_prior_reference_counts():
    """Reference collection counts: P(Dr18) = 51/162, priors sum to 1."""
    prior = mol_prior(fig2_catalog())
    assert prior["Dr18"] == pytest.approx(51 / 162, abs=1e-15)
    assert abs(sum(prior.values()) - 1.0) < 1e-12


def test_09_split_protocol():
    """20 splits x 4 train + 2 validation per class, disjoint, Dr24-25 test
    size 2; same seed regenerates identically."""
    catalog = fig2_catalog()
    plan = make_splits(catalog, seed=0)
    assert len(plan.splits) == N_SPLITS == 20
    for split in plan.splits:
        for cls, parts in split.items():
            assert len(parts["train"]) == N_TRAIN == 4
            assert len(parts["validation"]) == N_VAL == 2
            all_ids = parts["train"] + parts["validation"] + parts["test"]
            assert len(set(all_ids)) == len(all_ids)
        assert len(split["Dr24-25"]["test"]) == 2
    assert make_splits(catalog, seed=0).splits == plan.splits


def test_10_generation_determinism_and_detector_efficacy(tmp_path):
    """9 classes x 25 images in < 5 min on one machine; rerun byte-identical;
    detected crop contains the rendered pot bounding box in >= 95% of images."""
    config = RandomConfig(per_class=25, image_size=256, segments=64)
    profiles = bundled_profiles()

    run1 = tmp_path / "run1"
    t0 = time.perf_counter()
    rows = generate_dataset(profiles, config, seed=0, out_dir=str(run1))
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    assert len(rows) == 9 * 25

    run2 = tmp_path / "run2"
    generate_dataset(profiles, config, seed=0, out_dir=str(run2))
    rel_files = ["manifest.csv"] + [r["image_path"] for r in rows]
    match, mismatch, errors = filecmp.cmpfiles(run1, run2, rel_files, shallow=False)
    assert not mismatch and not errors

    crops = tmp_path / "crops"
    results = {r["image"]: r for r in detect_batch(str(run1), str(crops))}
    contained = 0
    for r in rows:
        record = results[r["image_path"]]
        assert "error" not in record, record
        box = record["crop_box"]
        # manifest bbox is inclusive, crop x1/y1 exclusive
        if (
            box["x0"] <= int(r["bbox_x0"])
            and box["y0"] <= int(r["bbox_y0"])
            and int(r["bbox_x1"]) < box["x1"]
            and int(r["bbox_y1"]) < box["y1"]
        ):
            contained += 1
    assert contained / len(rows) >= 0.95


def test_11_published_accuracies_are_not_targets():
    """The published classifier accuracies (e.g. 0.8182 +- 0.0089 for an
    Inception v3 model trained on one of the synthetic datasets) came from
    GPU training runs on museum photographs that are not distributed with
    this package. They are documentation, not acceptance targets: this
    suite validates the evaluation pipeline itself on synthetic predictions
    (accuracy weighting, confusion flags, collection prior) instead."""
    # the statement above is the deliverable; assert the substitute checks exist
    for name in (
        "test_05_metrics_match_oracles",
        "test_07_major_confusion_flags_reference_row",
        "test_08_collection_prior_reference_counts",
    ):
        assert name in globals()
