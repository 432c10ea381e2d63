from datetime import datetime

import numpy as np
import pytest

from gasbary.grid import GridImage
from gasbary.ingest import WindRecord, windrose
from gasbary.render import (
    MASK_COLOR,
    grid_rgb,
    render_grid,
    render_windrose,
    windrose_rgb,
    write_ppm,
)


def test_constant_grid_is_mid_gray():
    rgb = grid_rgb(GridImage.full(2, np.full(4, 7.0)), scale=1)
    assert rgb.shape == (2, 2, 3)
    assert np.all(rgb == 128)


def test_min_max_normalization_and_blocks():
    v = np.array([0.0, 1.0, 0.5, 1.0])
    rgb = grid_rgb(GridImage.full(2, v), scale=4)
    assert rgb.shape == (8, 8, 3)
    assert np.all(rgb[0:4, 0:4] == 0)
    assert np.all(rgb[0:4, 4:8] == 255)
    # a whole block carries one uniform color
    assert len(np.unique(rgb[4:8, 0:4, 0])) == 1


def test_masked_pixels_are_magenta():
    mask = np.array([True, True, True, False])
    g = GridImage(2, np.array([1.0, 2.0, 3.0, 0.0]), mask)
    rgb = grid_rgb(g, scale=1)
    assert tuple(rgb[1, 1]) == MASK_COLOR


def test_ppm_header_and_determinism(tmp_path):
    g = GridImage.full(3, np.arange(9.0))
    p1 = tmp_path / "a.ppm"
    p2 = tmp_path / "b.ppm"
    render_grid(g, p1, scale=2)
    render_grid(g, p2, scale=2)
    b1 = p1.read_bytes()
    assert b1.startswith(b"P6\n6 6\n255\n")
    assert b1 == p2.read_bytes()
    assert len(b1) == 11 + 6 * 6 * 3


def test_write_ppm_validates_shape(tmp_path):
    with pytest.raises(ValueError):
        write_ppm(np.zeros((4, 4), dtype=np.uint8), tmp_path / "x.ppm")
    with pytest.raises(ValueError):
        write_ppm(np.zeros((4, 4, 3), dtype=np.float64), tmp_path / "x.ppm")


def test_windrose_render(tmp_path):
    recs = [
        WindRecord(datetime(2021, 6, 1), 4.0, 0.0),
        WindRecord(datetime(2021, 6, 1), 0.0, 4.0),
        WindRecord(datetime(2021, 6, 1), 9.0, 0.0),
    ]
    h = windrose(recs)
    rgb = windrose_rgb(h, size=100)
    assert rgb.shape == (100, 100, 3)
    # something was painted besides the white background and gray ring
    colored = (rgb != 255).any(axis=2) & (rgb[..., 0] != 200)
    assert colored.sum() > 20
    p = tmp_path / "rose.ppm"
    render_windrose(h, p, size=100)
    assert p.read_bytes().startswith(b"P6\n100 100\n255\n")


def test_windrose_render_empty_histogram(tmp_path):
    h = windrose([])
    rgb = windrose_rgb(h, size=60)
    assert rgb.shape == (60, 60, 3)
