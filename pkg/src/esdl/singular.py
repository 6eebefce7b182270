"""Zeros, critical points and critical values on the ray V_0, and postsingular orbits.

On V_0 = {t e^(i pi/p) : t > 0} the reflection identity
conj f(z) = f(conj z) = f(w conj z) = f(z) makes f real, and differentiating
along the ray shows e^(i pi/p) f'(z) is real as well.  So both zeros and
critical points are sign changes of real functions of t.  By f(w z) = f(z)
the data on V_0 determines every V_k.

f has no finite asymptotic values for any member of the family; only critical
values seed the postsingular set.
"""
from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage, optimize

from .evalcore import LOG_MAX, FamilyParams, ScaledComplex, evaluate, scaled_terms

RAY_START = 1e-9
REAL_TOL_RAY = 1e-9
REAL_TOL_CV = 1e-8
CARRIER_TOL = 1e-8
ESCAPE_LOG = math.log(1e6)

HAS_ASYMPTOTIC_VALUES = False


class ConsistencyError(RuntimeError):
    """Raised when a quantity that must be real (or real-directed) is not."""


@dataclass
class SingularData:
    zeros_t: list
    crit_t: list
    crit_values: list
    t_max: float

    def ray_point(self, t: float, p: int) -> complex:
        return t * complex(math.cos(math.pi / p), math.sin(math.pi / p))


class OrbitVerdict(enum.Enum):
    ESCAPES = "ESCAPES"
    BOUNDED_WITHIN_BUDGET = "BOUNDED-WITHIN-BUDGET"


@dataclass
class PostsingularOrbit:
    seeds: list
    trajectories: list  # per seed: list of ScaledComplex with real units
    verdicts: list
    max_imag_residual: float = 0.0
    overflowed: list = field(default_factory=list)


def _ray_direction(p: int) -> complex:
    return complex(math.cos(math.pi / p), math.sin(math.pi / p))


def _ray_terms(params: FamilyParams, t, weighted: bool = False):
    return scaled_terms(params, np.asarray(t, dtype=float) * _ray_direction(params.p), weighted=weighted)


def f_on_ray(params: FamilyParams, t: float) -> float:
    """Real value f(t e^(i pi/p)); inf if it overflows."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    s, m, a = _ray_terms(params, t)
    s, m, a = complex(s), float(m), float(a)
    if abs(s.imag) > REAL_TOL_RAY * a:
        raise ConsistencyError(f"f is not real on V_0 at t={t}: residual {abs(s.imag) / a:.3e}")
    with np.errstate(over="ignore"):
        return float(params.lam * s.real * np.exp(m))


def _ray_values(params: FamilyParams, t: np.ndarray) -> np.ndarray:
    """Scaled real values lam * Re(s) along the ray (same sign as f)."""
    s, _, a = _ray_terms(params, t)
    res = np.abs(s.imag) / a
    if np.any(res > REAL_TOL_RAY):
        raise ConsistencyError(f"f is not real on V_0: residual {res.max():.3e}")
    return params.lam * s.real


def _carrier(params: FamilyParams, t: np.ndarray) -> complex:
    """Detect the fixed unit direction carrying f' along V_0 from samples."""
    s, _, a = _ray_terms(params, t, weighted=True)
    rel = np.abs(s) / a
    i = int(np.argmax(rel))
    u = s[i] / abs(s[i])
    off = np.abs((s * np.conj(u)).imag) / a
    if np.any(off > CARRIER_TOL):
        raise ConsistencyError(f"f' on V_0 is not confined to one real direction: residual {off.max():.3e}")
    return complex(u)


# below this t the exponential sum for f' cancels to rounding noise (f' = O(t^(p-1)))
SERIES_T = 1.0


def _derivative_series(params: FamilyParams, t: np.ndarray, n_terms: int = 12) -> np.ndarray:
    """e^(i pi/p) f'(t e^(i pi/p)) = lam p sum_j (-1)^j t^(jp-1) / (jp-1)!, j >= 1."""
    p = params.p
    out = np.zeros_like(t)
    for j in range(n_terms, 0, -1):
        out += (-1) ** j * np.exp((j * p - 1) * np.log(np.maximum(t, 1e-300)) - math.lgamma(j * p))
    return params.lam * p * out


def _derivative_values(params: FamilyParams, t: np.ndarray, carrier: complex) -> np.ndarray:
    """Sign-correct real values of f' along V_0, carrier direction removed.

    The exponential-sum branch omits the positive factor e^m, so only signs
    (and roots) are comparable across the two branches.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t <= SERIES_T
    out[small] = _derivative_series(params, t[small])
    if np.any(~small):
        s, _, a = _ray_terms(params, t[~small], weighted=True)
        proj = s * np.conj(carrier)
        off = np.abs(proj.imag) / a
        if np.any(off > CARRIER_TOL):
            raise ConsistencyError(f"f' left its carrier direction: residual {off.max():.3e}")
        out[~small] = params.lam * proj.real
    return out


def _scan_step(p: int) -> float:
    return math.pi / (8 * p) * min(1.0, math.sqrt(2.0))


def _sign_change_roots(fun, t_max: float, step: float) -> list:
    """All sign changes of fun on [RAY_START, t_max], refined by bisection."""
    n = max(2, int(math.ceil((t_max - RAY_START) / step)) + 1)
    grid = np.linspace(RAY_START, t_max, n)
    vals = fun(grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        lo, hi = float(grid[i]), float(grid[i + 1])
        root = optimize.bisect(lambda x: float(fun(np.array([x]))[0]), lo, hi, xtol=1e-12 * (1 + lo), maxiter=200)
        if root < t_max:
            roots.append(root)
    for i in np.nonzero(vals == 0)[0]:
        if 0 < i < n - 1:
            roots.append(float(grid[i]))
    return sorted(roots)


def zeros_on_ray(params: FamilyParams, t_max: float) -> list:
    """Parameters t of the zeros z = t e^(i pi/p) of f on V_0 with t < t_max."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    return _sign_change_roots(lambda t: _ray_values(params, t), t_max, _scan_step(params.p))


def critical_points_on_ray(params: FamilyParams, t_max: float) -> list:
    """Parameters t of the critical points on the closed ray, always including t = 0."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    step = _scan_step(params.p)
    carrier = _carrier(params, np.linspace(RAY_START, t_max, max(2, int(t_max / step) + 1)))
    # the detected direction must be the analytic one, e^(-i pi/p), up to sign
    expected = complex(math.cos(math.pi / params.p), -math.sin(math.pi / params.p))
    if min(abs(carrier - expected), abs(carrier + expected)) > CARRIER_TOL:
        raise ConsistencyError(f"carrier {carrier} differs from e^(-i pi/p)")
    carrier = expected
    roots = _sign_change_roots(lambda t: _derivative_values(params, t, carrier), t_max, step)
    return [0.0] + roots


def critical_values(params: FamilyParams, t_max: float) -> list:
    """f at the critical points of V_0 (origin first), checked to be real."""
    ts = critical_points_on_ray(params, t_max)
    return _values_at(params, ts)


def _values_at(params: FamilyParams, ts) -> list:
    out = []
    for t in ts:
        s, m, a = _ray_terms(params, t)
        s, m, a = complex(s), float(m), float(a)
        if abs(s.imag) >= REAL_TOL_CV * a:
            raise ConsistencyError(f"critical value at t={t} not real: residual {abs(s.imag) / a:.3e}")
        with np.errstate(over="ignore"):
            out.append(float(params.lam * s.real * np.exp(m)))
    return out


def singular_data(params: FamilyParams, t_max: float) -> SingularData:
    zeros = zeros_on_ray(params, t_max)
    crit = critical_points_on_ray(params, t_max)
    return SingularData(zeros_t=zeros, crit_t=crit, crit_values=_values_at(params, crit), t_max=float(t_max))


def interlacing_holds(data: SingularData) -> bool:
    """Exactly one zero between each pair of consecutive positive critical points."""
    crit = [t for t in data.crit_t if t > 0]
    zeros = np.asarray(data.zeros_t)
    for a, b in zip(crit, crit[1:]):
        if np.count_nonzero((zeros > a) & (zeros < b)) != 1:
            return False
    return True


def _real_step(params: FamilyParams, x: float):
    s, m, a = scaled_terms(params, complex(x))
    s, m, a = complex(s), float(m), float(a)
    res = abs(s.imag) / a
    val = ScaledComplex.from_parts(complex(params.lam * s.real, 0.0), m)
    return val, res


def _escapes(logs: list, overflowed: bool) -> bool:
    if not logs or logs[-1] < ESCAPE_LOG:
        return False
    tail = logs[-3:]
    increasing = all(b > a for a, b in zip(tail, tail[1:]))
    if len(tail) < 3:
        return overflowed and increasing
    return increasing


def postsingular_orbit(params: FamilyParams, budget: int, t_max: float, n_seeds: Optional[int] = None) -> PostsingularOrbit:
    """Iterate each critical value on the real line for up to ``budget`` steps.

    An orbit stops early once an iterate leaves the double range, since f of
    that point cannot be formed; its log-modulus is still recorded.
    """
    if budget < 3:
        raise ValueError("budget must be at least 3")
    seeds = critical_values(params, t_max)
    if n_seeds is not None:
        seeds = seeds[:n_seeds]
    trajs, verdicts, over, worst = [], [], [], 0.0
    for x0 in seeds:
        traj = [ScaledComplex.from_complex(complex(x0, 0.0))]
        x, stopped = x0, False
        for _ in range(budget):
            val, res = _real_step(params, x)
            worst = max(worst, res)
            traj.append(val)
            if val.log_abs > LOG_MAX:
                stopped = True
                break
            x = val.to_complex().real
        logs = [v.log_abs for v in traj]
        verdicts.append(OrbitVerdict.ESCAPES if _escapes(logs, stopped) else OrbitVerdict.BOUNDED_WITHIN_BUDGET)
        trajs.append(traj)
        over.append(stopped)
    return PostsingularOrbit(seeds=seeds, trajectories=trajs, verdicts=verdicts, max_imag_residual=worst, overflowed=over)


def find_zeros_2d(params: FamilyParams, radius: float = 30.0, h: float = 0.05, tol: float = 1e-8) -> list:
    """Zeros of f in |z| <= radius from grid minima of |f| polished by Newton.

    Independent of the ray parametrisation: used to check that every zero lies
    on a ray.
    """
    n = int(math.ceil(2 * (radius + 1) / h)) + 1
    x = np.linspace(-(radius + 1), radius + 1, n)
    Z = x[None, :] + 1j * x[:, None]
    s, m, a = scaled_terms(params, Z)
    with np.errstate(divide="ignore"):
        L = np.log(np.abs(s)) + m
    minima = (L == ndimage.minimum_filter(L, size=3, mode="nearest"))
    minima[[0, -1], :] = False
    minima[:, [0, -1]] = False
    found = []
    for z in Z[minima]:
        z = complex(z)
        for _ in range(80):
            s0, _, _ = scaled_terms(params, z)
            s1, _, _ = scaled_terms(params, z, weighted=True)
            if s1 == 0:
                break
            step = complex(s0 / s1)
            z -= step
            if abs(step) < 1e-15 * (1 + abs(z)):
                break
        s0, _, a0 = scaled_terms(params, z)
        if abs(z) <= radius and abs(complex(s0)) / float(a0) < tol:
            if all(abs(z - w) > 1e-6 for w in found):
                found.append(z)
    return sorted(found, key=lambda w: (abs(w), math.atan2(w.imag, w.real)))


# -- CSV persistence -----------------------------------------------------------

CSV_FIELDS = ["kind", "t", "z_re", "z_im", "f_value"]


def write_singular_csv(params: FamilyParams, data: SingularData, path) -> None:
    """One row per point: zeros then critical points, full float precision."""
    d = _ray_direction(params.p)
    fvals = _values_at(params, data.zeros_t) if data.zeros_t else []
    with open(path, "w", newline="") as fh:
        fh.write(f"# p={params.p} lambda={params.lam!r} t_max={data.t_max!r}\n")
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for t, fv in zip(data.zeros_t, fvals):
            z = t * d
            w.writerow(["zero", repr(t), repr(z.real), repr(z.imag), repr(fv)])
        for t, fv in zip(data.crit_t, data.crit_values):
            z = t * d
            w.writerow(["critical", repr(t), repr(z.real), repr(z.imag), repr(fv)])


def read_singular_csv(path) -> SingularData:
    with open(path, newline="") as fh:
        header = fh.readline()
        meta = dict(kv.split("=", 1) for kv in header.lstrip("# ").split())
        rows = list(csv.DictReader(fh))
    zeros = [float(r["t"]) for r in rows if r["kind"] == "zero"]
    crit = [(float(r["t"]), float(r["f_value"])) for r in rows if r["kind"] == "critical"]
    return SingularData(zeros_t=zeros, crit_t=[c[0] for c in crit], crit_values=[c[1] for c in crit], t_max=float(meta["t_max"]))


def write_orbit_csv(orbit: PostsingularOrbit, path) -> None:
    """One row per orbit point: seed index, step, sign and log-modulus, verdict."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed_index", "seed", "step", "sign", "log_abs", "verdict"])
        for i, (seed, traj, v) in enumerate(zip(orbit.seeds, orbit.trajectories, orbit.verdicts)):
            for n, pt in enumerate(traj):
                sign = 0 if pt.is_zero else int(math.copysign(1, pt.unit.real))
                w.writerow([i, repr(seed), n, sign, repr(pt.log_abs), v.value])


def cache_dir(explicit=None) -> Path:
    env = os.environ.get("ESDL_CACHE_DIR")
    if env:
        return Path(env)
    if explicit:
        return Path(explicit)
    return Path.home() / ".cache" / "esdl"


def cached_singular_data(params: FamilyParams, t_max: float, directory=None) -> SingularData:
    """singular_data with an on-disk CSV cache keyed by (p, lambda, t_max)."""
    d = cache_dir(directory)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"singular_p{params.p}_lam{params.lam!r}_tmax{float(t_max)!r}.csv"
    if path.exists():
        return read_singular_csv(path)
    data = singular_data(params, t_max)
    tmp = path.with_suffix(f".{os.getpid()}.tmp")
    write_singular_csv(params, data, tmp)
    os.replace(tmp, path)
    return data
