"""Orbit classification against the iterated maximum modulus, real fixed points,
growth margins on the real line, and ring/hair extraction from classified grids.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage, optimize

from .evalcore import (
    LOG_MAX,
    FamilyParams,
    MaxModLadder,
    ScaledComplex,
    derivative,
    f_array,
    find_escape_radius,
    maxmod_ladder,
    scaled_terms,
)

ESCAPE_LOG = math.log(1e6)
CONVERGED_TOL = 1e-12
KIND_TOL = 1e-9


class OrbitClass(enum.IntEnum):
    """Orbit verdicts; the integer values are the byte codes of the grid format."""

    UNDETERMINED = 0
    BOUNDED_WITHIN_BUDGET = 1
    ATTRACTED_REAL = 2
    ESCAPING = 3
    FAST_ESCAPING = 4


@dataclass
class OrbitRecord:
    seed: complex
    points: list
    escape_entry: Optional[int]
    fast_level: Optional[int]
    verdict: OrbitClass
    overflowed: bool = False

    @property
    def log_moduli(self) -> list:
        return [pt.log_abs for pt in self.points]


class FixedPointKind(enum.Enum):
    ATTRACTING = "ATTRACTING"
    REPELLING = "REPELLING"
    NEUTRAL = "NEUTRAL"


@dataclass
class RealFixedPoint:
    x_star: float
    multiplier: float
    kind: FixedPointKind


@dataclass
class RingReport:
    rings: list = field(default_factory=list)
    nested_count: int = 0
    radii: list = field(default_factory=list)


class DegenerateGrid(ValueError):
    pass


# -- iteration kernel ----------------------------------------------------------

@dataclass
class _Orbits:
    logs: np.ndarray      # (N, budget+1), nan past the stored length
    values: np.ndarray    # (N, budget+1) scaled units lam*s, nan past length
    scales: np.ndarray    # (N, budget+1) the matching exponents m
    length: np.ndarray    # number of stored points per orbit
    overflowed: np.ndarray


def _iterate(params: FamilyParams, z0: np.ndarray, budget: int) -> _Orbits:
    """Iterate f on an array of seeds, stopping each orbit once it overflows."""
    z0 = np.asarray(z0, dtype=complex).ravel()
    n = z0.size
    logs = np.full((n, budget + 1), np.nan)
    values = np.full((n, budget + 1), np.nan + 0j)
    scales = np.zeros((n, budget + 1))
    with np.errstate(divide="ignore"):
        logs[:, 0] = np.log(np.abs(z0))
    values[:, 0] = z0
    length = np.ones(n, dtype=np.int64)
    over = np.zeros(n, dtype=bool)
    real_seed = z0.imag == 0
    cur = z0.copy()
    idx = np.arange(n)
    for step in range(1, budget + 1):
        if idx.size == 0:
            break
        s, m, _ = scaled_terms(params, cur[idx])
        u = params.lam * s
        # f is real on the real axis; keep real orbits exactly real
        u = np.where(real_seed[idx], u.real + 0j, u)
        with np.errstate(divide="ignore"):
            lg = m + np.log(np.abs(u))
        logs[idx, step] = lg
        values[idx, step] = u
        scales[idx, step] = m
        length[idx] = step + 1
        ov = lg > LOG_MAX
        over[idx[ov]] = True
        keep = ~ov
        # split the exponent: m may exceed the double range while |u e^m| does not
        half = np.exp(0.5 * m[keep])
        cur[idx[keep]] = u[keep] * half * half
        idx = idx[keep]
    return _Orbits(logs, values, scales, length, over)


def _verdicts(params: FamilyParams, z0: np.ndarray, orb: _Orbits, R: float, ladder: MaxModLadder, max_level: int):
    n, width = orb.logs.shape
    rows = np.arange(n)
    thr = max(ESCAPE_LOG, math.log(R))
    logs = np.nan_to_num(orb.logs, nan=-np.inf)
    reached = logs >= thr
    has_entry = reached.any(axis=1)
    entry = np.where(has_entry, reached.argmax(axis=1), -1)

    # strictly increasing tail of (up to) the last three stored log-moduli
    last = logs[rows, orb.length - 1]
    mid = logs[rows, np.maximum(orb.length - 2, 0)]
    first = logs[rows, np.maximum(orb.length - 3, 0)]
    inc2 = (orb.length >= 2) & (last > mid)
    inc3 = inc2 & (orb.length >= 3) & (mid > first)
    monotone = np.where(orb.length >= 3, inc3, inc2 & orb.overflowed)

    levels = np.asarray(ladder.levels[: ladder.n_checked])
    fast_level = np.full(n, -1)
    for L in range(max_level, -1, -1):
        ok = np.ones(n, dtype=bool)
        for i, lev in enumerate(levels):
            j = i + 1 + L
            tol = 1e-9 * max(1.0, abs(lev))
            if j < width:
                stored = j < orb.length
                passed = np.where(stored, logs[:, j] >= lev - tol, orb.overflowed)
            else:
                passed = orb.overflowed & (orb.length <= width)
            ok &= passed
        fast_level = np.where(ok, L, fast_level)
    fast = (fast_level >= 0) & has_entry

    bounded = np.nanmax(orb.logs, axis=1) < ESCAPE_LOG
    verdict = np.full(n, int(OrbitClass.UNDETERMINED), dtype=np.uint8)
    verdict[bounded] = OrbitClass.BOUNDED_WITHIN_BUDGET

    real_seed = z0.imag == 0
    cand = np.nonzero(bounded & real_seed & (orb.length >= 2))[0]
    if cand.size:
        n_last = orb.length[cand] - 1
        xl = (orb.values[cand, n_last] * np.exp(orb.scales[cand, n_last])).real
        xp = (orb.values[cand, n_last - 1] * np.exp(orb.scales[cand, n_last - 1])).real
        settled = np.abs(xl - xp) < CONVERGED_TOL * (1 + np.abs(xl))
        s1, m1, _ = scaled_terms(params, xl + 0j, weighted=True)
        mult = np.abs(params.lam * s1) * np.exp(m1)
        verdict[cand[settled & (mult < 1)]] = OrbitClass.ATTRACTED_REAL

    esc = has_entry & monotone
    verdict[esc] = OrbitClass.ESCAPING
    verdict[esc & fast] = OrbitClass.FAST_ESCAPING
    verdict[fast & ~esc] = OrbitClass.FAST_ESCAPING
    fast_level = np.where(verdict == OrbitClass.FAST_ESCAPING, fast_level, -1)
    return verdict, entry, fast_level


def classify_array(params: FamilyParams, z, budget: int, R: float, ladder: MaxModLadder, max_level: int = 0):
    """Classify many seeds at once: returns ``(verdict codes, escape_entry, fast_level)``.

    Missing entries / levels are -1.  Shapes follow ``z``.
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    orb = _iterate(params, flat, budget)
    v, e, fl = _verdicts(params, flat, orb, R, ladder, max_level)
    return v.reshape(z.shape), e.reshape(z.shape), fl.reshape(z.shape)


def classify_orbit(
    params: FamilyParams,
    z: complex,
    budget: int,
    R: float,
    ladder: MaxModLadder,
    max_level: int = 0,
) -> OrbitRecord:
    """Iterate z and classify its orbit.

    FAST_ESCAPING means log|f^(n+L)(z)| >= log M^n(R, f) for every ladder level
    below saturation, for the smallest L <= ``max_level``.  With the default
    ``max_level = 0`` this is membership of A_R(f) as far as it can be tested.
    An orbit that leaves the double range passes the remaining levels.
    """
    if budget < 3:
        raise ValueError("budget must be at least 3")
    z0 = np.array([complex(z)])
    orb = _iterate(params, z0, budget)
    v, e, fl = _verdicts(params, z0, orb, R, ladder, max_level)
    n = int(orb.length[0])
    pts = [ScaledComplex.from_complex(complex(z))]
    for i in range(1, n):
        u = complex(orb.values[0, i])
        pts.append(ScaledComplex.from_parts(u, float(orb.scales[0, i])))
    return OrbitRecord(
        seed=complex(z),
        points=pts,
        escape_entry=int(e[0]) if e[0] >= 0 else None,
        fast_level=int(fl[0]) if fl[0] >= 0 else None,
        verdict=OrbitClass(int(v[0])),
        overflowed=bool(orb.overflowed[0]),
    )


def default_ladder(params: FamilyParams, R: Optional[float] = None, n_max: int = 8):
    """Escape radius (searched if not given) and its ladder."""
    if R is None:
        R = find_escape_radius(params)
    return R, maxmod_ladder(params, R, n_max)


# -- real line -----------------------------------------------------------------

def _real_f(params: FamilyParams, x) -> np.ndarray:
    return f_array(params, np.asarray(x, dtype=float) + 0j).real


def real_fixed_points(params: FamilyParams, a: float, b: float, n_samples: int = 10_000) -> list:
    """Fixed points of f in [a, b] from sign changes of f(x) - x, refined by bisection."""
    if not a < b:
        raise ValueError("need a < b")
    xs = np.linspace(a, b, n_samples)
    with np.errstate(invalid="ignore"):
        g = _real_f(params, xs) - xs
    roots = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        roots.append(optimize.bisect(lambda x: float(_real_f(params, x) - x), xs[i], xs[i + 1], xtol=1e-12, maxiter=200))
    roots += [float(xs[i]) for i in np.nonzero(g == 0)[0]]
    out = []
    for x in sorted(roots):
        mult = derivative(params, x).to_complex().real
        if abs(abs(mult) - 1) <= KIND_TOL:
            kind = FixedPointKind.NEUTRAL
        elif abs(mult) < 1:
            kind = FixedPointKind.ATTRACTING
        else:
            kind = FixedPointKind.REPELLING
        out.append(RealFixedPoint(x_star=float(x), multiplier=float(mult), kind=kind))
    return out


def growth_check(params: FamilyParams, x_max: float, n_samples: int = 10_000) -> float:
    """Minimum of f(x) - |x| over ``n_samples`` points of [-x_max, x_max].

    For even p, f(-x) = f(x) and only |x| is evaluated.
    """
    xs = np.linspace(-x_max, x_max, n_samples)
    arg = np.abs(xs) if params.is_even else xs
    with np.errstate(invalid="ignore"):
        margin = _real_f(params, arg) - np.abs(xs)
    return float(margin.min())


def g_min_closed_form(p: int) -> float:
    """min over x > 0 of g(x) = (p/x)(1 + x^p/p!), attained where x^p = p (p-2)!."""
    c = p * math.factorial(p - 2)
    return p / c ** (1.0 / p) * (1.0 + 1.0 / (p - 1))


def _g(p: int, x: float) -> float:
    return (p / x) * (1.0 + math.exp(p * math.log(x) - math.lgamma(p + 1)))


def g_min_numeric(p: int):
    """Golden-section minimum of g: returns ``(x_min, g(x_min))``."""
    # g is unimodal on (0, inf); bracket its minimum from a coarse log grid
    xs = np.geomspace(1e-2, 10.0 * p, 400)
    i = int(np.argmin([_g(p, x) for x in xs]))
    x = optimize.golden(lambda t: _g(p, t), brack=(xs[i - 1], xs[i], xs[i + 1]), tol=1e-12)
    return float(x), _g(p, x)


def g_min(p: int) -> float:
    """Closed-form minimum of g, cross-checked against a golden-section search."""
    if p < 3:
        raise ValueError("p must be >= 3")
    closed = g_min_closed_form(p)
    _, numeric = g_min_numeric(p)
    if abs(numeric - closed) > 1e-9 * abs(closed):
        raise AssertionError(f"g_min mismatch for p={p}: closed {closed!r} vs numeric {numeric!r}")
    return closed


# -- grids -----------------------------------------------------------------------

_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = np.ones((3, 3), dtype=bool)


def _trace_loop(region: np.ndarray) -> list:
    """Cyclic list of the pixels just outside ``region`` along its outer contour."""
    from skimage import measure

    padded = np.pad(region, 1).astype(float)
    contours = measure.find_contours(padded, 0.5)
    if not contours:
        return []
    c = max(contours, key=len)
    loop = []
    for r, q in c:
        # contour vertices sit halfway between an inside and an outside pixel
        cands = {(int(math.floor(r)), int(math.floor(q))), (int(math.ceil(r)), int(math.ceil(q)))}
        for (i, j) in sorted(cands):
            if not padded[i, j]:
                pix = (i - 1, j - 1)
                if not loop or loop[-1] != pix:
                    loop.append(pix)
    if len(loop) > 1 and loop[0] == loop[-1]:
        loop.pop()
    return loop


def _separates(loop: list, shape, origin) -> bool:
    """Flood-fill check that the loop pixels cut the origin off from the frame."""
    wall = np.zeros(shape, dtype=bool)
    for (i, j) in loop:
        if 0 <= i < shape[0] and 0 <= j < shape[1]:
            wall[i, j] = True
    if wall[origin]:
        return False
    lab, _ = ndimage.label(~wall, _CROSS)
    frame = set(np.unique(np.concatenate([lab[0, :], lab[-1, :], lab[:, 0], lab[:, -1]]))) - {0}
    return lab[origin] not in frame


def spider_rings(classification_grid, origin_index) -> RingReport:
    """Count disjoint, radially ordered loops of FAST_ESCAPING pixels around the origin.

    Non-fast pixels are split into 4-connected holes.  For a radius r (pixel
    units from ``origin_index``) let Z(r) be the disk of radius r together with
    every hole touching it, with interior gaps filled.  Its outer neighbours are
    all fast, so Z(r) is cut off from the frame whenever it does not reach the
    frame.  Rings are taken greedily from the inside: the first is the boundary
    of Z(0); each next one must enclose a hole lying wholly beyond the previous
    ring.
    """
    grid = np.asarray(classification_grid)
    if grid.ndim != 2:
        raise ValueError("classification grid must be 2-D")
    if np.all(grid == grid.flat[0]):
        raise DegenerateGrid("classification grid is a single class")
    origin = tuple(int(v) for v in origin_index)
    fast = grid == OrbitClass.FAST_ESCAPING
    holes = ~fast
    lab, nl = ndimage.label(holes, _CROSS)
    ii, jj = np.indices(grid.shape)
    dist = np.hypot(ii - origin[0], jj - origin[1])
    # minimum distance over each hole and its 4-neighbours
    near = dist.copy()
    near[1:, :] = np.minimum(near[1:, :], dist[:-1, :])
    near[:-1, :] = np.minimum(near[:-1, :], dist[1:, :])
    near[:, 1:] = np.minimum(near[:, 1:], dist[:, :-1])
    near[:, :-1] = np.minimum(near[:, :-1], dist[:, 1:])
    reach = np.asarray(ndimage.minimum(near, lab, np.arange(1, nl + 1))) if nl else np.zeros(0)
    border = np.zeros(grid.shape, dtype=bool)
    border[[0, -1], :] = True
    border[:, [0, -1]] = True

    def enclosed(r):
        touched = np.zeros(nl + 1, dtype=bool)
        touched[1:] = reach <= r
        region = (dist <= r) | touched[lab]
        region[origin] = True
        return ndimage.binary_fill_holes(region, _CROSS)

    report = RingReport()
    r, prev = 0.0, None
    while True:
        if prev is not None:
            outer = float(dist[ndimage.binary_dilation(prev, _SQUARE)].max())
            inside = np.zeros(nl + 1, dtype=bool)
            inside[np.unique(lab[prev])] = True
            cand = [reach[k - 1] for k in range(1, nl + 1) if not inside[k] and reach[k - 1] > outer]
            if not cand:
                break
            r = max(outer, min(cand))
        region = enclosed(r)
        if (region & border).any():
            break
        loop = _trace_loop(region)
        if not loop or not _separates(loop, grid.shape, origin):
            break
        report.rings.append(loop)
        report.radii.append(r)
        prev = region
    report.nested_count = len(report.rings)
    return report


def strip_hair_presence(
    params: FamilyParams,
    k: int,
    grid,
    budget: int,
    R: Optional[float] = None,
    ladder: Optional[MaxModLadder] = None,
    threads: int = 1,
    classifier=None,
) -> bool:
    """Whether fast-escaping pixels cross the window from left edge to right edge.

    The window must sit inside the horizontal strip (2k-1) pi < Im z < (2k+1) pi
    with positive real part.  A crossing is numerical evidence of an escaping
    curve running through the strip, not a proof.  ``classifier`` optionally
    replaces the orbit classifier, as in ``render_classification``.
    """
    from .raster import _run_tiles, classification_grid

    lo_y = grid.center.imag - grid.half_height
    hi_y = grid.center.imag + grid.half_height
    if not ((2 * k - 1) * math.pi <= lo_y and hi_y <= (2 * k + 1) * math.pi):
        raise ValueError(f"grid is not confined to the strip R({k})")
    if grid.center.real - grid.half_width <= 0:
        raise ValueError("grid must lie in Re z > 0")
    if classifier is not None:
        codes, _ = _run_tiles(grid, classifier, 64, threads)
    else:
        if ladder is None:
            R, ladder = default_ladder(params, R)
        codes, _ = classification_grid(params, grid, budget, R, ladder, threads=threads)
    fast = codes == OrbitClass.FAST_ESCAPING
    lab, _ = ndimage.label(fast, _CROSS)
    left = set(np.unique(lab[:, 0])) - {0}
    right = set(np.unique(lab[:, -1])) - {0}
    return bool(left & right)


# -- binary grid format ------------------------------------------------------------

GRID_MAGIC = b"ESDL"
_HEADER = struct.Struct("<4sIII")


def encode_grid(codes: np.ndarray, budget: int) -> bytes:
    """16-byte header (magic, u32 width, u32 height, u32 budget; little-endian), then one byte per pixel."""
    codes = np.asarray(codes, dtype=np.uint8)
    h, w = codes.shape
    return _HEADER.pack(GRID_MAGIC, w, h, budget) + np.ascontiguousarray(codes).tobytes()


def decode_grid(blob: bytes):
    magic, w, h, budget = _HEADER.unpack_from(blob)
    if magic != GRID_MAGIC:
        raise ValueError("not an ESDL classification grid")
    body = blob[_HEADER.size:]
    if len(body) != w * h:
        raise ValueError(f"grid body has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy(), budget
