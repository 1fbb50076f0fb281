"""Ground-truth rasterization and imaging metrics."""

import numpy as np
import pytest

from _oracles import rasterize_ref
from palpsim.errors import LumpAbsentError
from palpsim.raster import (BACKGROUND, DEFAULT_EXTENT, LUMP, TISSUE,
                            GroundTruthImage, com_error, f1_class, f1_macro,
                            lump_com, lump_size, pixel_centers, pixel_pitch,
                            rasterize_body, size_error)


def test_pixel_grid_geometry():
    px, py = pixel_pitch(DEFAULT_EXTENT, (128, 128))
    assert px == pytest.approx(2.4 / 128, rel=1e-15)
    assert px == pytest.approx(py, rel=1e-15)
    xs, ys = pixel_centers(DEFAULT_EXTENT, (128, 128))
    assert xs[0] == pytest.approx(-1.2 + px / 2, rel=1e-12)
    assert xs[-1] == pytest.approx(1.2 - px / 2, rel=1e-12)
    # row 0 is the top of the window
    assert ys[0] == pytest.approx(2.2 - py / 2, rel=1e-12)
    assert ys[-1] == pytest.approx(-0.2 + py / 2, rel=1e-12)


def test_rasterize_rejects_non_square_pixels(default_body):
    with pytest.raises(ValueError):
        rasterize_body(default_body, resolution=128, extent=(-1, 1, -1, 3))


def test_rasterize_matches_per_pixel_reference(twin_bodies):
    _, without = twin_bodies  # lump-free so the tissue-only oracle applies
    img = rasterize_body(without, resolution=32)
    ref = rasterize_ref(without.mesh.rest_positions, without.mesh.triangles,
                        DEFAULT_EXTENT, 32)
    np.testing.assert_array_equal(img.classes, ref)


def test_rasterize_classes_and_orientation(default_body):
    img = rasterize_body(default_body)
    assert img.classes.shape == (128, 128)
    assert set(np.unique(img.classes)) <= {BACKGROUND, TISSUE, LUMP}
    # body occupies the upper half plane: bottom rows (y < 0) are background
    assert np.all(img.classes[-10:] == BACKGROUND)
    assert np.any(img.classes[40:80] != BACKGROUND)


def test_lump_disc_overrides_tissue(twin_bodies):
    with_lump, without = twin_bodies
    img_l = rasterize_body(with_lump)
    img_n = rasterize_body(without)
    assert np.sum(img_l.classes == LUMP) > 0
    assert np.sum(img_n.classes == LUMP) == 0
    # outside the disc the two maps agree exactly
    diff = img_l.classes != img_n.classes
    assert np.all(img_l.classes[diff] == LUMP)


def test_lump_pixel_count_tracks_disc_area(twin_bodies):
    with_lump, _ = twin_bodies
    img = rasterize_body(with_lump)
    px, py = pixel_pitch(img.extent, img.classes.shape)
    measured = np.sum(img.classes == LUMP) * px * py
    exact = np.pi * with_lump.lump.radius ** 2
    assert measured == pytest.approx(exact, rel=0.1)
    assert lump_size(img) == pytest.approx(measured, rel=1e-12)


def test_lump_com_matches_disc_center(twin_bodies):
    with_lump, _ = twin_bodies
    img = rasterize_body(with_lump)
    com = lump_com(img)
    px, _ = pixel_pitch(img.extent, img.classes.shape)
    assert np.hypot(*(com - np.array(with_lump.lump.center))) < px


def test_lump_metrics_converge_with_resolution(twin_bodies):
    with_lump, _ = twin_bodies
    lo = rasterize_body(with_lump, resolution=128)
    hi = rasterize_body(with_lump, resolution=512)
    exact = np.pi * with_lump.lump.radius ** 2
    err_lo = abs(lump_size(lo) - exact)
    err_hi = abs(lump_size(hi) - exact)
    assert err_hi < err_lo
    assert np.allclose(lump_com(hi), with_lump.lump.center, atol=0.01)


def test_f1_hand_case():
    gt = np.array([[1, 1], [2, 0]], dtype=np.uint8)
    pred = np.array([[1, 2], [2, 0]], dtype=np.uint8)
    # tissue: tp=1 fp=0 fn=1 -> 2/3; lump: tp=1 fp=1 fn=0 -> 2/3
    assert f1_class(pred, gt, TISSUE) == pytest.approx(2 / 3, rel=1e-15)
    assert f1_class(pred, gt, LUMP) == pytest.approx(2 / 3, rel=1e-15)
    assert f1_macro(pred, gt) == pytest.approx(2 / 3, rel=1e-15)


def test_f1_perfect_and_absent():
    img = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    assert f1_class(img, img, TISSUE) == 1.0
    # lump absent from both: perfect agreement about absence
    assert f1_class(img, img, LUMP) == 1.0
    assert f1_macro(img, img) == 1.0


def test_f1_total_miss():
    gt = np.full((4, 4), TISSUE, dtype=np.uint8)
    pred = np.full((4, 4), BACKGROUND, dtype=np.uint8)
    assert f1_class(pred, gt, TISSUE) == 0.0


def test_f1_shape_mismatch():
    with pytest.raises(ValueError):
        f1_class(np.zeros((2, 2)), np.zeros((3, 3)), TISSUE)


def test_size_error_percent_semantics():
    gt = np.zeros((10, 10), dtype=np.uint8)
    gt[:2, :2] = LUMP  # 4 pixels
    pred = np.zeros((10, 10), dtype=np.uint8)
    pred[:2, :3] = LUMP  # 6 pixels: 50% over
    assert size_error(pred, gt, extent=(0, 1, 0, 1)) == pytest.approx(50.0)
    # symmetric magnitude for undershoot
    assert size_error(gt, pred, extent=(0, 1, 0, 1)) == pytest.approx(100 / 3)


def test_size_error_nan_without_gt_lump():
    gt = np.zeros((4, 4), dtype=np.uint8)
    pred = np.zeros((4, 4), dtype=np.uint8)
    pred[0, 0] = LUMP
    assert np.isnan(size_error(pred, gt, extent=(0, 1, 0, 1)))


def test_com_error_single_pixel_shift():
    a = np.zeros((8, 8), dtype=np.uint8)
    b = np.zeros((8, 8), dtype=np.uint8)
    a[3, 3] = LUMP
    b[3, 4] = LUMP
    err = com_error(a, b, extent=(0, 1, 0, 1))
    assert err == pytest.approx(1 / 8, rel=1e-12)


def test_com_error_nan_when_either_absent():
    a = np.zeros((4, 4), dtype=np.uint8)
    b = np.zeros((4, 4), dtype=np.uint8)
    b[1, 1] = LUMP
    assert np.isnan(com_error(a, b, extent=(0, 1, 0, 1)))
    assert np.isnan(com_error(b, a, extent=(0, 1, 0, 1)))
    with pytest.raises(LumpAbsentError):
        lump_com(a, extent=(0, 1, 0, 1))


def test_ground_truth_image_is_frozen(default_body):
    img = rasterize_body(default_body)
    with pytest.raises(ValueError):
        img.classes[0, 0] = 2
    assert img.resolution == (128, 128)


def test_metrics_accept_wrapped_and_raw_images(twin_bodies):
    with_lump, _ = twin_bodies
    img = rasterize_body(with_lump)
    assert f1_macro(img, img.classes) == 1.0
    assert lump_size(img.classes, extent=img.extent) == lump_size(img)
