"""Plane partition into the central p-gon, the p half-strips and the p sectors.

Region codes used by the array predicates:

    -1  BOUNDARY
     0  POLYGON
     1  STRIP      (index array carries k)
     2  SECTOR     (index array carries j)
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .evalcore import FamilyParams, log_abs_f, max_modulus

BOUNDARY_TOL = 1e-12

CODE_BOUNDARY, CODE_POLYGON, CODE_STRIP, CODE_SECTOR = -1, 0, 1, 2


def min_strip_half_width(p: int) -> float:
    """Smallest admissible strip half-width, log(32p) / (2 sin(pi/p))."""
    return math.log(32 * p) / (2.0 * math.sin(math.pi / p))


@dataclass(frozen=True)
class PartitionConfig:
    p: int
    nu: float
    q: Optional[float] = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise ValueError(f"p must be an integer with p >= 3, got {self.p!r}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        qmin = min_strip_half_width(self.p)
        if self.q is None:
            object.__setattr__(self, "q", qmin)
        elif self.q < qmin * (1 - 1e-12):
            raise ValueError(f"q must satisfy q >= log(32p)/(2 sin(pi/p)) = {qmin:.6g}, got {self.q!r}")


class RegionTag(enum.Enum):
    POLYGON = "POLYGON"
    STRIP = "STRIP"
    SECTOR = "SECTOR"
    BOUNDARY = "BOUNDARY"


@dataclass(frozen=True)
class Region:
    tag: RegionTag
    index: Optional[int] = None

    def __post_init__(self):
        indexed = self.tag in (RegionTag.STRIP, RegionTag.SECTOR)
        if indexed != (self.index is not None):
            raise ValueError("index must be given exactly for STRIP and SECTOR")

    def __str__(self):
        return self.tag.value if self.index is None else f"{self.tag.value}({self.index})"


@dataclass
class EstimatedConstants:
    nu_prime: float
    eps0: float
    samples_checked: int
    margin: float


def polygon_vertices(config: PartitionConfig) -> list:
    """Vertices (nu / cos(pi/p)) exp((2k+1) i pi / p), k = 0..p-1."""
    p = config.p
    rad = config.nu / math.cos(math.pi / p)
    return [rad * complex(math.cos((2 * k + 1) * math.pi / p), math.sin((2 * k + 1) * math.pi / p)) for k in range(p)]


def _edge_normals(p: int) -> np.ndarray:
    # outward normals of the p-gon edges sit at angles 2 pi k / p
    return np.exp(2j * np.pi * np.arange(p) / p)


def _strip_rotations(p: int) -> np.ndarray:
    # w = z * exp((2k-1) i pi / p) maps Q_k onto the horizontal half-strip
    return np.exp(1j * np.pi * (2 * np.arange(p) - 1) / p)


def _dist_to_polygon_boundary(config: PartitionConfig, z: np.ndarray):
    """Return (signed support value, distance to the polygon boundary)."""
    p, nu = config.p, config.nu
    proj = (z[..., None] * np.conj(_edge_normals(p))).real  # support function per edge
    inside = proj.max(axis=-1) - nu  # < 0 strictly inside
    verts = np.asarray(polygon_vertices(config))
    a, b = verts, np.roll(verts, -1)
    d = b - a
    t = ((z[..., None] - a) * np.conj(d)).real / (np.abs(d) ** 2)
    t = np.clip(t, 0.0, 1.0)
    dist = np.abs(z[..., None] - (a + t * d)).min(axis=-1)
    return inside, dist


def classify_points(config: PartitionConfig, z, tol: float = BOUNDARY_TOL):
    """Vectorised partition membership: returns ``(code, index)`` arrays."""
    z = np.asarray(z, dtype=complex)
    p, q = config.p, config.q
    inside, dpoly = _dist_to_polygon_boundary(config, z)
    w = z[..., None] * _strip_rotations(p)  # (..., p)
    in_strip = (w.real > 0) & (np.abs(w.imag) < q)
    # distances to the strip edges (half-lines |Im w| = q, Re w >= 0) and caps (Re w = 0, |Im w| <= q)
    edge = np.where(w.real >= 0, np.abs(np.abs(w.imag) - q), np.hypot(w.real, np.abs(w.imag) - q))
    cap = np.where(np.abs(w.imag) <= q, np.abs(w.real), np.inf)
    dstrip = np.minimum(edge, cap).min(axis=-1)

    code = np.full(z.shape, CODE_SECTOR, dtype=np.int8)
    index = np.full(z.shape, -1, dtype=np.int16)
    # sector j contains the far ray at angle -2 pi j / p
    sector = np.mod(np.rint(-np.angle(z) * p / (2 * np.pi)), p).astype(np.int16)
    index[:] = sector
    k_strip = np.argmax(in_strip, axis=-1).astype(np.int16)
    any_strip = in_strip.any(axis=-1)
    code[any_strip] = CODE_STRIP
    index[any_strip] = k_strip[any_strip]
    poly = inside < 0
    code[poly] = CODE_POLYGON
    index[poly] = -1
    near = (dpoly < tol) | ((inside >= 0) & (dstrip < tol))
    code[near] = CODE_BOUNDARY
    index[near] = -1
    return code, index


def classify_point(config: PartitionConfig, z: complex) -> Region:
    """Region of the partition containing z (polygon first, then strips, then sectors)."""
    code, index = classify_points(config, np.array([complex(z)]))
    c, i = int(code[0]), int(index[0])
    if c == CODE_POLYGON:
        return Region(RegionTag.POLYGON)
    if c == CODE_STRIP:
        return Region(RegionTag.STRIP, i)
    if c == CODE_SECTOR:
        return Region(RegionTag.SECTOR, i)
    return Region(RegionTag.BOUNDARY)


def in_S_r(p: int, r: float, z: complex) -> bool:
    if not r > 0:
        raise ValueError("r must be positive")
    z = complex(z)
    return abs(z.real) >= r and abs(z.imag) <= math.pi / (2 * p)


def in_R_strip(k: int, z: complex) -> bool:
    y = complex(z).imag
    return (2 * k - 1) * math.pi < y < (2 * k + 1) * math.pi


def ray_directions(p: int) -> np.ndarray:
    """Unit directions of the rays V_k, at angles pi/p - 2 pi k / p."""
    return np.exp(1j * (math.pi / p - 2 * math.pi * np.arange(p) / p))


def dist_to_rays_array(p: int, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    c = z[..., None] * np.conj(ray_directions(p))
    d = np.where(c.real >= 0, np.abs(c.imag), np.abs(c))
    return d.min(axis=-1)


def dist_to_rays(p: int, z: complex) -> float:
    """Distance from z to the union of the closed rays V_k."""
    return float(dist_to_rays_array(p, np.array([complex(z)]))[0])


class ConstantsNotFound(RuntimeError):
    pass


def _sector_samples(config: PartitionConfig, n: int, seed: int, max_draws: int = 2_000_000):
    """Quasi-random points of T(nu) inside |z| <= 10 nu (Halton, rejection)."""
    radius = 10.0 * config.nu
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    out, drawn = [], 0
    while sum(len(o) for o in out) < n and drawn < max_draws:
        u = sampler.random(max(4096, 2 * n))
        drawn += len(u)
        z = radius * ((2 * u[:, 0] - 1) + 1j * (2 * u[:, 1] - 1))
        z = z[np.abs(z) <= radius]
        code, _ = classify_points(config, z)
        out.append(z[code == CODE_SECTOR])
    pts = np.concatenate(out) if out else np.zeros(0, complex)
    return pts[:n]


class _LogMTable:
    """Upper bound on log M(r) from a log-spaced table (M is increasing in r)."""

    def __init__(self, params: FamilyParams, r_lo: float, r_hi: float, n_nodes: int = 512):
        self.nodes = np.geomspace(r_lo, r_hi, n_nodes)
        self.values = np.array([max_modulus(params, float(x)) for x in self.nodes])

    def upper(self, r: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.nodes, r, side="left")
        if np.any(idx >= len(self.nodes)):
            raise ValueError("radius beyond the tabulated range")
        return self.values[idx]


def estimate_constants(
    params: FamilyParams,
    nu_grid: Sequence[float],
    eps_grid: Sequence[float],
    sample_budget: int = 10_000,
    q: Optional[float] = None,
    seed: int = 0,
) -> EstimatedConstants:
    """Grid-search nu' and eps0 for |f(z)| > max(e^(eps0 nu'), M(eps0 |z|, f)) on T(nu').

    For each nu on the grid (ascending) the inequality is tested at
    ``sample_budget`` quasi-random points of T(nu) with |z| <= 10 nu, for eps0
    in decreasing order.  The first passing pair is returned with the minimum
    log-space slack.  M is bounded above by a table lookup, so the slack is
    conservative.  A sampled estimate, not a proof.
    """
    if not nu_grid or not eps_grid:
        raise ValueError("grids must be nonempty")
    if sample_budget < 1000:
        raise ValueError("sample_budget must be at least 1000")
    if any(not 0 < e < 1 for e in eps_grid):
        raise ValueError("eps0 candidates must lie in (0, 1)")
    # every sample lies outside P(nu), so |z| >= nu
    table = _LogMTable(params, 0.5 * min(eps_grid) * min(nu_grid), 10.0 * max(nu_grid) * (1 + 1e-9))
    for nu in sorted(nu_grid):
        config = PartitionConfig(params.p, nu, q)
        z = _sector_samples(config, sample_budget, seed)
        if len(z) < sample_budget:
            continue
        lf = log_abs_f(params, z)
        for eps in sorted(eps_grid, reverse=True):
            lm = table.upper(eps * np.abs(z))
            slack = lf - np.maximum(eps * nu, lm)
            margin = float(slack.min())
            if margin > 0:
                return EstimatedConstants(nu_prime=float(nu), eps0=float(eps), samples_checked=len(z), margin=margin)
    raise ConstantsNotFound("no (nu', eps0) pair on the grids passed; widen the grids")
