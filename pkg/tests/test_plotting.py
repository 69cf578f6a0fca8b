import numpy as np
import pytest
from PIL import Image

from fusionloc.data.world import room_world
from fusionloc.plotting import OUTLIER_RGBA, marker_colors, parse_size, plot_error_map

YELLOW = np.array([255, 255, 0])


def _yellow_at(png, pixels):
    img = np.asarray(Image.open(png).convert("RGB")).astype(int)
    out = []
    for c, r in pixels:
        out.append(bool(np.all(np.abs(img[int(round(r)), int(round(c))] - YELLOW) <= 8)))
    return np.array(out)


def test_colormap_never_yellow():
    colors, outliers = marker_colors(np.linspace(0, 2, 101), 2.0)
    assert not outliers.any()
    assert not np.any((colors[:, 0] > 0.8) & (colors[:, 1] > 0.8) & (colors[:, 2] < 0.2))


def test_threshold_strict():
    _, out = marker_colors([2.0, 2.0000001, 45.0], 2.0)
    assert out.tolist() == [False, True, True]


def test_all_zero_errors(tmp_path):
    pos = np.random.default_rng(0).uniform(0, 5, size=(20, 2))
    res = plot_error_map(pos, np.zeros(20), 2.0, tmp_path / "z.png", (400, 300))
    assert np.allclose(res.colors, res.colors[0])
    assert not _yellow_at(res.path, res.pixels).any()


def test_single_outlier(tmp_path):
    pos = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 1.0], [4.0, 2.5]])
    err = np.array([0.1, 3.0, 0.5, 1.9])
    res = plot_error_map(pos, err, 2.0, tmp_path / "o.png", (400, 300), world=room_world((5, 3)))
    assert res.outliers.tolist() == [False, True, False, False]
    assert tuple(res.colors[1]) == OUTLIER_RGBA
    assert _yellow_at(res.path, res.pixels).tolist() == [False, True, False, False]


@pytest.mark.parametrize("size", [(320, 240), (640, 200)])
def test_size_honoured(tmp_path, size):
    res = plot_error_map([[0, 0], [1, 1]], [0, 1], 2.0, tmp_path / "s.png", size)
    assert Image.open(res.path).size == size


def test_parse_size():
    assert parse_size("800x600") == (800, 600)
    with pytest.raises(ValueError):
        parse_size("800")
