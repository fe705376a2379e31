"""Both kernel flavors (numba loop source vs pure numpy) compute the same
values: bit-exact for integer/boolean kernels, last-ulp for float sums."""

import numpy as np
import pytest

from iscreen import kernels as K


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_blend_disk_flavors_bit_identical(rng):
    for _ in range(40):
        img1 = rng.uniform(0, 255, (37, 53))
        img2 = img1.copy()
        cx, cy = rng.uniform(-4, 56), rng.uniform(-4, 40)
        r, it = rng.uniform(0.5, 14), rng.uniform(0, 255)
        K._blend_disk_loop(img1, cx, cy, r, it)
        K._blend_disk_np(img2, cx, cy, r, it)
        assert np.array_equal(img1, img2)


def test_label8_flavors_identical(rng):
    for _ in range(60):
        h, w = rng.integers(4, 50, 2)
        m = (rng.random((h, w)) < rng.uniform(0.1, 0.9)).astype(np.uint8)
        l1, n1 = K._label8_loop(m)
        l2, n2 = K._label8_np(m)
        assert n1 == n2
        assert np.array_equal(l1, l2)


def test_label8_connectivity_is_eight(rng):
    m = np.zeros((4, 4), np.uint8)
    m[0, 0] = m[1, 1] = m[2, 2] = 1          # diagonal chain -> one component
    _, n = K.label8(m)
    assert n == 1


def test_binmorph_flavors_identical(rng):
    for _ in range(30):
        m = (rng.random((19, 23)) < rng.uniform(0.2, 0.7)).astype(np.uint8)
        for k in (3, 5, 7):
            for dilate in (True, False):
                assert np.array_equal(K._binmorph_loop(m, k, dilate),
                                      K._binmorph_np(m, k, dilate))


def test_graymorph_and_blur_and_sharpen_flavors_identical(rng):
    for _ in range(30):
        g = rng.integers(0, 256, (19, 23), dtype=np.uint8)
        for k in (3, 5):
            for dilate in (True, False):
                assert np.array_equal(K._graymorph_loop(g, k, dilate),
                                      K._graymorph_np(g, k, dilate))
        for r in (1, 2, 3):
            assert np.array_equal(K._box_blur_loop(g, r), K._box_blur_np(g, r))
        assert np.array_equal(K._sharpen_loop(g), K._sharpen_np(g))


def test_warp_flavors_identical(rng):
    for _ in range(30):
        g = rng.integers(0, 256, (21, 27), dtype=np.uint8)
        th = rng.uniform(-0.7, 0.7)
        c, s = np.cos(th), np.sin(th)
        cx, cy = 13.0, 10.0
        m02 = cx - c * cx - s * cy
        m12 = cy + s * cx - c * cy
        args = (c, s, m02, -s, c, m12, 21, 27, np.uint8(7))
        assert np.array_equal(K._warp_loop(g, *args), K._warp_np(g, *args))


def test_dtw_flavors_identical(rng):
    for _ in range(30):
        a = rng.uniform(0, 500, (rng.integers(2, 40), 2))
        b = rng.uniform(0, 500, (rng.integers(2, 40), 2))
        assert K._dtw_loop(a, b) == float(K.dtw(a, b))


def test_gradfit_flavors_agree(rng):
    for _ in range(20):
        img = rng.uniform(0, 255, (30, 30))
        excl = (rng.random((30, 30)) < 0.1).astype(np.uint8)
        r1 = K._gradfit_loop(img, excl, 4, 7)
        r2 = K._gradfit_np(img, excl, 4, 7)
        assert np.allclose(r1, r2, rtol=1e-9, atol=1e-9)
