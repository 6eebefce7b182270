import math

import numpy as np
import pytest

from esdl.evalcore import FamilyParams
from esdl.geometry import PartitionConfig
from esdl.orbits import OrbitClass, default_ladder
from esdl.raster import (
    POLYGON_RGB,
    RAY_RGB,
    STRIP_RGB,
    GridSpec,
    RasterImage,
    decode_image,
    encode_image,
    intensity,
    overlay_partition,
    render_classification,
)


@pytest.mark.parametrize("kw", [
    dict(px_w=15, px_h=32),
    dict(px_w=32, px_h=16385),
    dict(px_w=32.5, px_h=32),
    dict(half_width=0.0),
    dict(half_height=-1.0),
])
def test_gridspec_validation(kw):
    base = dict(center=0j, half_width=1.0, half_height=1.0, px_w=32, px_h=32)
    base.update(kw)
    with pytest.raises(ValueError):
        GridSpec(**base)


def test_pixel_mapping_formula():
    g = GridSpec(1 - 2j, 3.0, 2.0, 30, 20)
    z = g.pixel_coords()
    for j, i in [(0, 0), (19, 29), (7, 11)]:
        x = ((i + 0.5) / g.px_w - 0.5) * 2 * g.half_width
        y = (0.5 - (j + 0.5) / g.px_h) * 2 * g.half_height
        assert z[j, i] == pytest.approx(g.center + x + 1j * y, abs=1e-14)
    # row 0 is the top edge
    assert z[0, 0].imag > z[-1, 0].imag
    assert g.pixel_to_z(7, 11) == z[7, 11]


def test_even_sizes_give_exact_negation():
    g = GridSpec(0j, 20.0, 20.0, 512, 256)
    z = g.pixel_coords()
    assert np.array_equal(z[::-1, ::-1], -z)


def test_nearest_pixel():
    g = GridSpec(0j, 2.0, 2.0, 64, 64)
    r, c = g.nearest_pixel(1.0508 + 0j)
    assert abs(g.pixel_to_z(r, c) - 1.0508) <= math.hypot(*g.pixel_size) / 2


# -- encoding -----------------------------------------------------------------------

def test_pgm_bytes():
    img = RasterImage(2, 1, 1, bytes([0, 255]))
    assert encode_image(img) == b"P5\n2 1\n255\n\x00\xff"


def test_ppm_bytes():
    img = RasterImage(1, 1, 3, bytes([1, 2, 3]))
    assert encode_image(img) == b"P6\n1 1\n255\n\x01\x02\x03"


@pytest.mark.parametrize("ch", [1, 3])
def test_encode_decode_roundtrip(ch):
    rng = np.random.default_rng(ch)
    data = rng.integers(0, 256, 37 * 19 * ch, dtype=np.uint8).tobytes()
    img = RasterImage(37, 19, ch, data)
    back = decode_image(encode_image(img))
    assert back == img


def test_image_validation():
    with pytest.raises(ValueError):
        RasterImage(2, 2, 2, bytes(8))
    with pytest.raises(ValueError):
        RasterImage(2, 2, 1, bytes(3))
    with pytest.raises(ValueError):
        decode_image(b"P3\n1 1\n255\n000")


def test_intensity_mapping():
    codes = np.array([OrbitClass.FAST_ESCAPING, OrbitClass.ESCAPING, OrbitClass.BOUNDED_WITHIN_BUDGET, OrbitClass.ESCAPING])
    entry = np.array([0, 3, -1, 24])
    assert list(intensity(entry, codes, 24)) == [255, round(255 * 21 / 24), 0, 0]


# -- rendering ----------------------------------------------------------------------

def _stub(code):
    return lambda z: (np.full(z.shape, int(code), np.uint8), np.full(z.shape, -1))


def test_all_bounded_stub_renders_black():
    g = GridSpec(0j, 1.0, 1.0, 40, 24)
    codes, img = render_classification(FamilyParams(4, 1.0), g, 12, classifier=_stub(OrbitClass.BOUNDED_WITHIN_BUDGET))
    assert img.data == bytes(40 * 24)
    assert np.all(codes == OrbitClass.BOUNDED_WITHIN_BUDGET)


def test_render_budget_minimum():
    with pytest.raises(ValueError):
        render_classification(FamilyParams(4, 1.0), GridSpec(0j, 1, 1, 16, 16), 2)


@pytest.fixture(scope="module")
def quarter_box():
    P = FamilyParams(4, 0.25)
    R, lad = default_ladder(P)
    g = GridSpec(0j, 2.0, 2.0, 128, 128)
    codes, img = render_classification(P, g, 24, R, lad)
    return P, R, lad, g, codes, img


def test_basin_pixel_is_dark(quarter_box):
    _, _, _, g, codes, img = quarter_box
    r, c = g.nearest_pixel(1.0508464962516 + 0j)
    arr = img.as_array()
    assert arr[r, c] == 0
    assert codes[r, c] == OrbitClass.BOUNDED_WITHIN_BUDGET


def test_tiles_and_threads_do_not_change_bytes(quarter_box):
    P, R, lad, g, codes, img = quarter_box
    for tile, threads in [(128, 1), (16, 3), (37, 2)]:
        c2, i2 = render_classification(P, g, 24, R, lad, threads=threads, tile=tile)
        assert i2.data == img.data
        assert np.array_equal(c2, codes)


def test_half_turn_symmetry_for_even_p():
    P = FamilyParams(6, 1.0)
    R, lad = default_ladder(P)
    codes, _ = render_classification(P, GridSpec(0j, 10.0, 10.0, 96, 64), 16, R, lad)
    assert np.array_equal(codes, codes[::-1, ::-1])


# -- overlays -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def square_overlay():
    g = GridSpec(0j, 2.0, 2.0, 200, 200)
    black = RasterImage(200, 200, 1, bytes(200 * 200))
    cfg = PartitionConfig(4, 1.0)
    return g, cfg, black, overlay_partition(black, g, cfg)


def test_overlay_on_black_only_marks_curves(square_overlay):
    g, cfg, _, out = square_overlay
    arr = out.as_array()
    lit = arr.any(axis=2)
    assert 0 < lit.mean() < 0.1
    colours = {tuple(v) for v in arr[lit]}
    assert colours <= {POLYGON_RGB, STRIP_RGB, RAY_RGB}


def test_red_pixels_trace_the_square(square_overlay):
    g, _, _, out = square_overlay
    arr = out.as_array()
    red = np.all(arr == POLYGON_RGB, axis=2)
    z = g.pixel_coords()[red]
    half_diag = math.hypot(*g.pixel_size) / 2
    # distance from each red pixel to the boundary of the square max(|x|,|y|) = 1
    d = np.abs(np.maximum(np.abs(z.real), np.abs(z.imag)) - 1)
    assert np.all(d < half_diag + 1e-12)
    for v in (1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j):
        # vertices fall on pixel corners; one of the four touching pixels is inside
        r, c = g.nearest_pixel(v)
        assert red[r - 1:r + 2, c - 1:c + 2].sum() >= 3
    # every side is drawn along its whole length
    assert red[g.nearest_pixel(0.3 + 1j)] and red[g.nearest_pixel(-1 - 0.4j)]


def test_overlay_idempotent(square_overlay):
    g, cfg, _, out = square_overlay
    assert overlay_partition(out, g, cfg) == out


def test_overlay_dimension_mismatch(square_overlay):
    g, cfg, _, _ = square_overlay
    with pytest.raises(ValueError):
        overlay_partition(RasterImage(16, 16, 1, bytes(256)), g, cfg)
