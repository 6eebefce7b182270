"""Tile-parallel rasterisation of orbit classifications, partition overlays and
binary netpbm encoding.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .evalcore import FamilyParams, MaxModLadder
from .geometry import (
    PartitionConfig,
    _dist_to_polygon_boundary,
    _strip_rotations,
    dist_to_rays_array,
)
from .orbits import OrbitClass, classify_array, default_ladder

PX_MIN, PX_MAX = 16, 16384
TILE = 64

POLYGON_RGB = (255, 0, 0)
STRIP_RGB = (0, 255, 0)
RAY_RGB = (0, 0, 255)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular viewport sampled at pixel centres; row 0 is the top edge."""

    center: complex
    half_width: float
    half_height: float
    px_w: int
    px_h: int

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("half_width and half_height must be positive")
        for name in ("px_w", "px_h"):
            v = getattr(self, name)
            if int(v) != v or not PX_MIN <= v <= PX_MAX:
                raise ValueError(f"{name} must be an integer in [{PX_MIN}, {PX_MAX}], got {v!r}")
        object.__setattr__(self, "center", complex(self.center))

    @classmethod
    def from_box(cls, x_lo, x_hi, y_lo, y_hi, px_w, px_h) -> "GridSpec":
        return cls(complex((x_lo + x_hi) / 2, (y_lo + y_hi) / 2), (x_hi - x_lo) / 2, (y_hi - y_lo) / 2, px_w, px_h)

    @property
    def pixel_size(self) -> tuple:
        return 2 * self.half_width / self.px_w, 2 * self.half_height / self.px_h

    def pixel_coords(self, rows=None, cols=None) -> np.ndarray:
        """Complex pixel centres, shape (len(rows), len(cols))."""
        rows = np.arange(self.px_h) if rows is None else np.asarray(rows)
        cols = np.arange(self.px_w) if cols is None else np.asarray(cols)
        # (2i + 1 - w) / w keeps exact negation symmetry for even sizes
        x = (2 * cols + 1 - self.px_w) / self.px_w * self.half_width
        y = (self.px_h - 2 * rows - 1) / self.px_h * self.half_height
        return (self.center.real + x)[None, :] + 1j * (self.center.imag + y)[:, None]

    def pixel_to_z(self, row: int, col: int) -> complex:
        return complex(self.pixel_coords([row], [col])[0, 0])

    def nearest_pixel(self, z: complex) -> tuple:
        dx, dy = self.pixel_size
        col = int(math.floor((z.real - self.center.real + self.half_width) / dx))
        row = int(math.floor((self.center.imag + self.half_height - z.imag) / dy))
        return min(max(row, 0), self.px_h - 1), min(max(col, 0), self.px_w - 1)


@dataclass
class RasterImage:
    px_w: int
    px_h: int
    channels: int
    data: bytes

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        self.data = bytes(self.data)
        if len(self.data) != self.px_w * self.px_h * self.channels:
            raise ValueError("data length does not match dimensions")

    def as_array(self) -> np.ndarray:
        shape = (self.px_h, self.px_w) if self.channels == 1 else (self.px_h, self.px_w, 3)
        return np.frombuffer(self.data, dtype=np.uint8).reshape(shape).copy()

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        ch = 1 if arr.ndim == 2 else arr.shape[2]
        return cls(arr.shape[1], arr.shape[0], ch, arr.tobytes())


# a classifier maps an array of pixel centres to (verdict codes, escape entries)
Classifier = Callable[[np.ndarray], tuple]


def _tiles(grid: GridSpec, tile: int):
    for r0 in range(0, grid.px_h, tile):
        for c0 in range(0, grid.px_w, tile):
            yield slice(r0, min(r0 + tile, grid.px_h)), slice(c0, min(c0 + tile, grid.px_w))


def _run_tiles(grid: GridSpec, classify: Classifier, tile: int, threads: int):
    codes = np.zeros((grid.px_h, grid.px_w), dtype=np.uint8)
    entry = np.full((grid.px_h, grid.px_w), -1, dtype=np.int32)

    def work(rs_cs):
        rs, cs = rs_cs
        z = grid.pixel_coords(np.arange(rs.start, rs.stop), np.arange(cs.start, cs.stop))
        c, e = classify(z)
        # each tile owns a disjoint block of the output
        codes[rs, cs] = c
        entry[rs, cs] = e

    tiles = list(_tiles(grid, tile))
    if threads <= 1:
        for t in tiles:
            work(t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, tiles))
    return codes, entry


def classification_grid(
    params: FamilyParams,
    grid: GridSpec,
    budget: int,
    R: float,
    ladder: MaxModLadder,
    threads: int = 1,
    tile: int = TILE,
    max_level: int = 0,
):
    """Verdict codes and escape entries (-1 if none) for every pixel centre."""

    def classify(z):
        v, e, _ = classify_array(params, z, budget, R, ladder, max_level)
        return v, e

    return _run_tiles(grid, classify, tile, threads)


def intensity(entry: np.ndarray, codes: np.ndarray, budget: int) -> np.ndarray:
    """255 (1 - n / budget) rounded for escaping pixels, 0 otherwise."""
    esc = (codes == OrbitClass.ESCAPING) | (codes == OrbitClass.FAST_ESCAPING)
    val = np.rint(255.0 * (1.0 - entry / budget))
    return np.where(esc & (entry >= 0), val, 0).astype(np.uint8)


def render_classification(
    params: FamilyParams,
    grid: GridSpec,
    budget: int,
    R: Optional[float] = None,
    ladder: Optional[MaxModLadder] = None,
    threads: int = 1,
    tile: int = TILE,
    classifier: Optional[Classifier] = None,
):
    """Classify every pixel and return ``(codes, grayscale RasterImage)``.

    ``classifier`` replaces the orbit classifier (useful for stubs); it receives
    an array of pixel centres and returns ``(codes, escape_entries)``.
    """
    if budget < 3:
        raise ValueError("budget must be at least 3")
    if classifier is None:
        if ladder is None:
            R, ladder = default_ladder(params, R)

        def classifier(z):
            v, e, _ = classify_array(params, z, budget, R, ladder)
            return v, e

    codes, entry = _run_tiles(grid, classifier, tile, threads)
    return codes, RasterImage.from_array(intensity(entry, codes, budget))


def overlay_partition(image: RasterImage, grid: GridSpec, config: PartitionConfig) -> RasterImage:
    """RGB copy with polygon edges, strip edges and rays drawn as 1-pixel lines.

    A pixel is coloured when its centre lies within half a pixel diagonal of
    the curve.  Rays are drawn first, then strips, then the polygon on top.
    Strip edges are only drawn outside the polygon.
    """
    if (image.px_w, image.px_h) != (grid.px_w, grid.px_h):
        raise ValueError(
            f"image is {image.px_w}x{image.px_h} but grid is {grid.px_w}x{grid.px_h}"
        )
    arr = image.as_array()
    rgb = np.repeat(arr[:, :, None], 3, axis=2) if image.channels == 1 else arr.copy()
    z = grid.pixel_coords()
    half_diag = 0.5 * math.hypot(*grid.pixel_size)

    inside, dpoly = _dist_to_polygon_boundary(config, z)
    w = z[..., None] * _strip_rotations(config.p)
    edge = np.where(w.real >= 0, np.abs(np.abs(w.imag) - config.q), np.hypot(w.real, np.abs(w.imag) - config.q))
    dstrip = edge.min(axis=-1)
    dray = dist_to_rays_array(config.p, z)

    rgb[dray < half_diag] = RAY_RGB
    rgb[(dstrip < half_diag) & (inside >= 0)] = STRIP_RGB
    rgb[dpoly < half_diag] = POLYGON_RGB
    return RasterImage.from_array(rgb)


def encode_image(image: RasterImage) -> bytes:
    """Binary PGM (1 channel) or PPM (3 channels)."""
    magic = b"P5" if image.channels == 1 else b"P6"
    return magic + f"\n{image.px_w} {image.px_h}\n255\n".encode("ascii") + image.data


_HEADER_RE = re.compile(rb"^(P5|P6)\s+(\d+)\s+(\d+)\s+255\s")


def decode_image(blob: bytes) -> RasterImage:
    m = _HEADER_RE.match(blob)
    if not m:
        raise ValueError("not a binary PGM/PPM with maxval 255")
    ch = 1 if m.group(1) == b"P5" else 3
    w, h = int(m.group(2)), int(m.group(3))
    return RasterImage(w, h, ch, blob[m.end():])
