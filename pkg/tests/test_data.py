import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ganleak.data import (Dataset, GaussianRingConfig, PatternConfig, ScoreClassifier, channel_stddev,
                          classifier_score, fixed_partition, gap_from_losses, load_image_folder, read_manifest,
                          read_pnm, save_grid, split_train_holdout, synth_gaussian_ring, synth_patterns, write_manifest,
                          write_pnm)
from ganleak.data.metrics import classifier_score_from_probs


def test_degenerate_ring_is_one_gaussian():
    cfg = GaussianRingConfig(n_modes=1, radius=0.0, std=0.1, samples=4000)
    pts = synth_gaussian_ring(cfg, 0).raw()
    assert np.all(np.abs(pts.mean(axis=0)) < 3 * 0.1 / math.sqrt(4000))
    assert pts.std(axis=0) == pytest.approx([0.1, 0.1], rel=0.05)


def test_ring_modes_cluster_at_centers():
    cfg = GaussianRingConfig(n_modes=8, radius=2.0, std=0.05, samples=4000)
    ds = synth_gaussian_ring(cfg, 1)
    pts = ds.raw()
    for k, c in enumerate(cfg.centers()):
        sel = pts[ds.labels == k]
        assert np.all(np.abs(sel.mean(axis=0) - c) < 3 * cfg.std / math.sqrt(len(sel)))


def test_ring_seeds_are_distinct_but_reproducible():
    cfg = GaussianRingConfig(samples=2000, std=0.1)
    a, b, a2 = synth_gaussian_ring(cfg, 1), synth_gaussian_ring(cfg, 2), synth_gaussian_ring(cfg, 1)
    assert np.array_equal(a.examples, a2.examples)
    assert not np.any(np.all(a.examples == b.examples, axis=1))
    assert np.abs(a.raw().std() - b.raw().std()) < 0.05


def test_ring_config_validation():
    with pytest.raises(ValueError):
        GaussianRingConfig(std=0.0)
    with pytest.raises(ValueError):
        GaussianRingConfig(n_modes=0)


def test_patterns_shape_and_range():
    ds = synth_patterns(PatternConfig(samples=40), 0)
    assert ds.shape == (1, 8, 8) and ds.channels == 1
    assert ds.examples.min() >= -1 and ds.examples.max() <= 1
    assert set(np.unique(ds.labels)) <= set(range(8))


def test_dataset_rejects_unnormalised_values():
    with pytest.raises(ValueError):
        Dataset(np.full((2, 2), 1.5))


@given(n=st.integers(2, 200), seed=st.integers(0, 1000))
def test_split_is_a_partition(n, seed):
    ds = Dataset(np.zeros((n, 2)))
    sp = split_train_holdout(ds, 0.5, seed)
    assert len(sp.train_idx) == round(0.5 * n)
    assert np.intersect1d(sp.train_idx, sp.holdout_idx).size == 0
    assert np.array_equal(np.union1d(sp.train_idx, sp.holdout_idx), np.arange(n))
    again = split_train_holdout(ds, 0.5, seed)
    assert np.array_equal(sp.train_idx, again.train_idx)


def test_split_of_hundred_is_fifty_fifty():
    sp = split_train_holdout(Dataset(np.zeros((100, 2))), 0.5, 0)
    assert (len(sp.train), len(sp.holdout)) == (50, 50)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.001])
def test_split_rejects_empty_sides(fraction):
    with pytest.raises(ValueError):
        split_train_holdout(Dataset(np.zeros((10, 2))), fraction, 0)


def test_fixed_partition_and_manifest(tmp_path):
    ds = fixed_partition(Dataset(np.zeros((5, 2))), 3)
    write_manifest(tmp_path / "m.txt", ds)
    rows = read_manifest(tmp_path / "m.txt")
    assert rows == [("0", "train"), ("1", "train"), ("2", "train"), ("3", "holdout"), ("4", "holdout")]
    with pytest.raises(ValueError):
        fixed_partition(ds, 5)


# -- images ---------------------------------------------------------------------------------
@pytest.mark.parametrize("value,expected", [(-1.0, -1.0), (1.0, 1.0)])
def test_black_and_white_images(tmp_path, value, expected):
    write_pnm(tmp_path / "a.pgm", np.full((4, 4), value))
    ds = load_image_folder(tmp_path, 4)
    assert np.all(ds.examples == expected)


def test_grid_round_trip_within_quantization(tmp_path):
    imgs = np.random.default_rng(0).uniform(-1, 1, (6, 3, 5, 5))
    save_grid(tmp_path / "g.ppm", imgs, ncols=3, pad=1)
    back = read_pnm(tmp_path / "g.ppm") * 2.0 - 1.0
    for k in range(6):
        r, c = divmod(k, 3)
        y, x = 1 + r * 6, 1 + c * 6
        assert np.all(np.abs(back[y:y + 5, x:x + 5, :] - np.moveaxis(imgs[k], 0, -1)) <= 1 / 127.5)


def test_ascii_pnm_and_bad_files(tmp_path, caplog):
    (tmp_path / "a.pgm").write_text("P2\n# comment\n2 2\n4\n0 1\n2 4\n")
    assert np.allclose(read_pnm(tmp_path / "a.pgm")[..., 0], [[0, 0.25], [0.5, 1.0]])
    (tmp_path / "b.pgm").write_bytes(b"P5\n2 2\n255\n\x00")
    ds = load_image_folder(tmp_path, 2)
    assert len(ds) == 1 and ds.skipped == 1
    with pytest.raises(ValueError):
        load_image_folder(tmp_path / "missing", 2)


def test_area_resize_preserves_mean(tmp_path):
    img = np.random.default_rng(1).uniform(-1, 1, (6, 6))
    write_pnm(tmp_path / "x.pgm", img)
    small = load_image_folder(tmp_path, 3).examples[0, 0]
    full = np.rint((img + 1) * 127.5) / 127.5 - 1
    assert small.mean() == pytest.approx(full.mean(), abs=1e-12)
    assert small[0, 0] == pytest.approx(full[:2, :2].mean(), abs=1e-12)


# -- metrics ------------------------------------------------------------------------------
def test_gap_examples():
    assert gap_from_losses(-0.7, -0.7).value == 0.0
    g = gap_from_losses(-1.386, -0.805)
    assert g.value == pytest.approx(0.581) and g.signed == pytest.approx(0.581)
    assert gap_from_losses(-0.805, -1.386).value == g.value


def test_channel_stddev_examples():
    assert channel_stddev(np.zeros((3, 1, 2, 2))).std[0] == 0.0
    half = np.concatenate([-np.ones((2, 1, 2, 2)), np.ones((2, 1, 2, 2))])
    assert channel_stddev(half).std[0] == pytest.approx(0.5)
    rgb = np.stack([np.zeros((4, 4)), np.ones((4, 4)), -np.ones((4, 4))])[None]
    assert np.allclose(channel_stddev(rgb).mean, [0.5, 1.0, 0.0])
    with pytest.raises(ValueError):
        channel_stddev(np.zeros((0, 1, 2, 2)))


@pytest.mark.parametrize("C", [2, 5, 10])
def test_classifier_score_closed_forms(C):
    assert classifier_score_from_probs(np.full((20, C), 1.0 / C)) == pytest.approx(1.0, abs=1e-9)
    onehot = np.eye(C)[np.arange(20 * C) % C]
    assert classifier_score_from_probs(onehot) == pytest.approx(C, abs=1e-9)
    same = np.eye(C)[np.zeros(30, dtype=int)]
    assert classifier_score_from_probs(same) == pytest.approx(1.0, abs=1e-9)


@given(seed=st.integers(0, 10_000), C=st.integers(2, 8))
def test_classifier_score_bounds(seed, C):
    p = np.random.default_rng(seed).dirichlet(np.full(C, 0.3), size=25)
    s = classifier_score_from_probs(p)
    assert 1.0 - 1e-12 <= s <= C + 1e-12


def test_trained_classifier_on_patterns():
    ds = synth_patterns(PatternConfig(samples=600, noise=0.2), 0)
    clf = ScoreClassifier(64, 8, seed=0).fit(ds.examples, ds.labels, steps=300)
    test = synth_patterns(PatternConfig(samples=200, noise=0.2), 1)
    assert clf.accuracy(test.examples.reshape(200, -1), test.labels) > 0.9
    assert 1.0 <= classifier_score(test.examples, clf) <= 8.0
    with pytest.raises(RuntimeError):
        clf.fit(ds.examples, ds.labels)
    with pytest.raises(ValueError):
        classifier_score(np.zeros((0, 64)), clf)
