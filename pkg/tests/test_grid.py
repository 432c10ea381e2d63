import numpy as np
import pytest
from hypothesis import given, strategies as st

from gasbary.grid import (
    GridImage,
    ImageMeta,
    PixelPosition,
    centroid,
    centroid_of,
    flatten,
    pixel_position,
    pixel_rows_cols,
    total_mass,
    unflatten,
)


def test_pixel_position_corners():
    assert pixel_position(1, 4) == PixelPosition(1, 1)
    assert pixel_position(4, 4) == PixelPosition(1, 4)
    assert pixel_position(5, 4) == PixelPosition(2, 1)
    assert pixel_position(16, 4) == PixelPosition(4, 4)


def test_pixel_position_rejects_out_of_range():
    with pytest.raises(IndexError):
        pixel_position(0, 3)
    with pytest.raises(IndexError):
        pixel_position(10, 3)


@given(st.integers(min_value=1, max_value=40), st.data())
def test_pixel_position_bijection(n, data):
    j = data.draw(st.integers(min_value=1, max_value=n * n))
    row, col = pixel_position(j, n)
    assert 1 <= row <= n and 1 <= col <= n
    assert (row - 1) * n + col == j


def test_pixel_rows_cols_matches_scalar():
    n = 5
    rows, cols = pixel_rows_cols(n)
    for j in range(1, n * n + 1):
        p = pixel_position(j, n)
        assert rows[j - 1] == p.row
        assert cols[j - 1] == p.col


@given(st.integers(min_value=1, max_value=12))
def test_flatten_unflatten_roundtrip(n):
    rng = np.random.default_rng(n)
    img = rng.random((n, n))
    assert np.array_equal(unflatten(flatten(img), n), img)


def test_flatten_rejects_non_square():
    with pytest.raises(ValueError):
        flatten(np.zeros((2, 3)))


def test_grid_image_validation():
    with pytest.raises(ValueError):
        GridImage(n=2, values=np.zeros(3), mask=np.ones(4, dtype=bool))
    with pytest.raises(ValueError):
        GridImage(n=2, values=np.full(4, np.nan), mask=np.ones(4, dtype=bool))
    with pytest.raises(ValueError, match=r"row 2.*col 1"):
        GridImage(n=2, values=np.array([0.0, 0.0, -1.0, 0.0]), mask=np.ones(4, dtype=bool))


def test_masked_values_are_zeroed_and_arrays_frozen():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    mask = np.array([True, False, True, True])
    g = GridImage(n=2, values=vals, mask=mask)
    assert g.values[1] == 0.0
    vals[0] = 99.0  # caller's copy, not the image's
    assert g.values[0] == 1.0
    with pytest.raises(ValueError):
        g.values[0] = 5.0


def test_full_constructor_and_mass():
    g = GridImage.full(2, np.array([1.0, 2.0, 3.0, 4.0]))
    assert g.mask.all()
    assert total_mass(g) == 10.0


def test_centroid_point_mass():
    v = np.zeros(9)
    v[5] = 2.0  # row 2, col 3
    g = GridImage.full(3, v)
    assert centroid(g) == (2.0, 3.0)


def test_centroid_uniform_is_center():
    g = GridImage.full(4, np.ones(16))
    assert centroid(g) == (2.5, 2.5)


def test_centroid_of_zero_mass_rejected():
    with pytest.raises(ValueError):
        centroid_of(np.zeros(9), 3)


def test_meta_carried():
    meta = ImageMeta(date="2021-06-01", wind=(1.0, -2.0), bbox=(0.0, 0.0, 1.0, 1.0))
    g = GridImage.full(2, np.ones(4), meta=meta)
    assert g.meta.wind == (1.0, -2.0)
    assert g.meta.date == "2021-06-01"
