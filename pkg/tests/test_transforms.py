import numpy as np
import pytest

from fusionloc.data.transforms import color_jitter, crop, preprocess_image, resize_short_side, sample_scan
from fusionloc.errors import DegenerateInputError


def _image(h, w, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def test_resize_420x240():
    out = resize_short_side(_image(240, 420), 256)
    assert out.shape == (256, 448, 3)  # 420 * 256 / 240 = 448


def test_preprocess_shapes_and_finite():
    for mode in ("train", "eval"):
        x = preprocess_image(_image(240, 420), mode, np.random.default_rng(0))
        assert x.shape == (3, 256, 256)
        assert x.dtype == np.float32
        assert np.isfinite(x).all()


def test_eval_identity_on_square_input():
    img = _image(256, 256)
    x = preprocess_image(img, "eval", mean=(0, 0, 0), std=(1, 1, 1))
    np.testing.assert_allclose(x, img.transpose(2, 0, 1) / 255.0, atol=1e-7)


def test_eval_geometry_idempotent():
    img = _image(240, 420)
    once = crop(resize_short_side(img, 256), 256, "eval")
    twice = crop(resize_short_side(once, 256), 256, "eval")
    np.testing.assert_array_equal(once, twice)


def test_train_crop_deterministic_under_seed():
    img = _image(240, 420)
    a = preprocess_image(img, "train", np.random.default_rng(7))
    b = preprocess_image(img, "train", np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_centre_crop_offsets():
    img = np.arange(6 * 10).reshape(6, 10, 1).repeat(3, axis=2).astype(np.uint8)
    out = crop(img, 4, "eval")
    np.testing.assert_array_equal(out[..., 0], img[1:5, 3:7, 0])


def test_jitter_zero_strength_is_identity():
    img = _image(30, 40)
    out = color_jitter(img, np.random.default_rng(0), 0.0, 0.0, 0.0, 0.0)
    np.testing.assert_array_equal(out, img)


def test_jitter_deterministic_and_in_range():
    img = _image(30, 40)
    a = color_jitter(img, np.random.default_rng(3))
    b = color_jitter(img, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    assert a.dtype == np.uint8 and a.min() >= 0 and a.max() <= 255


def test_jitter_changes_image():
    img = _image(30, 40)
    assert not np.array_equal(color_jitter(img, np.random.default_rng(1)), img)


def _scan(n, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 2)).astype(np.float32)


def test_scan_subsample_eval_deterministic():
    s = _scan(1150)
    a, b = sample_scan(s, 1024, "eval"), sample_scan(s, 1024, "eval")
    assert a.shape == (1024, 2)
    np.testing.assert_array_equal(a, b)
    # every selected point is an original point, without repeats
    assert len({tuple(p) for p in a}) == 1024


def test_scan_exact_size_identity():
    s = _scan(1024)
    np.testing.assert_array_equal(sample_scan(s, 1024, "eval"), s)


@pytest.mark.parametrize("mode", ["train", "eval"])
def test_scan_padding_keeps_originals(mode):
    s = _scan(10)
    out = sample_scan(s, 1024, mode, np.random.default_rng(0))
    assert out.shape == (1024, 2)
    np.testing.assert_array_equal(out[:10], s)
    originals = {tuple(p) for p in s}
    assert all(tuple(p) in originals for p in out[10:])


def test_scan_train_subsample_without_replacement():
    s = _scan(1150)
    out = sample_scan(s, 1024, "train", np.random.default_rng(0))
    assert len({tuple(p) for p in out}) == 1024


def test_empty_scan_rejected():
    with pytest.raises(DegenerateInputError):
        sample_scan(np.zeros((0, 2)), 16)
