"""Run configuration and the numbered verification checks with flat JSON reports."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .evalcore import (
    FamilyParams,
    evaluate_series,
    f_array,
    find_escape_radius,
    imag_residual,
    log_abs_f,
    maxmod_ladder,
    scaled_terms,
)
from .geometry import (
    CODE_SECTOR,
    ConstantsNotFound,
    PartitionConfig,
    classify_points,
    dist_to_rays,
    estimate_constants,
    min_strip_half_width,
)
from .orbits import g_min_closed_form, g_min_numeric, growth_check, real_fixed_points, spider_rings, strip_hair_presence
from .raster import GridSpec, classification_grid
from .singular import (
    OrbitVerdict,
    cached_singular_data,
    critical_points_on_ray,
    find_zeros_2d,
    interlacing_holds,
    postsingular_orbit,
)

CHECK_IDS = (
    "SYM-OMEGA",
    "SYM-EVEN",
    "SERIES",
    "CVS-ZEROS",
    "CVS-REAL",
    "CVS-INTERLACE",
    "PSING-REAL",
    "DAVEL-SAMPLED",
    "SR-MAP",
    "THM2-GROWTH",
    "THM2-GMIN",
    "PROP-BASIN",
    "SW-RINGS",
    "HAIR-STRIP",
)

NU_GRID = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
EPS_GRID = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
N_RANDOM = 1000
SEED = 0


class ConfigError(ValueError):
    pass


class UnknownCheck(KeyError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: int = 4
    lam: float = 1.0
    nu: Optional[float] = None      # None: estimate nu' on first use
    q: Optional[float] = None       # None: smallest admissible half-width
    R: Optional[float] = None       # None: find_escape_radius
    budget: int = 24
    viewport: tuple = (-20.0, 20.0, -20.0, 20.0)
    resolution: tuple = (512, 512)
    t_max: float = 60.0
    out_dir: str = "esdl-out"
    cache_dir: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        try:
            FamilyParams(self.p, self.lam)
        except ValueError as exc:
            raise ConfigError(str(exc).replace("p >= 3", "p ≥ 3")) from None
        if self.nu is not None and not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu!r}")
        if self.q is not None and self.q < min_strip_half_width(self.p) * (1 - 1e-12):
            raise ConfigError(f"q must be >= log(32p)/(2 sin(pi/p)) = {min_strip_half_width(self.p):.6g}")
        if self.R is not None and not self.R > 0:
            raise ConfigError("escape radius must be positive")
        if int(self.budget) != self.budget or self.budget < 3:
            raise ConfigError(f"budget must be an integer >= 3, got {self.budget!r}")
        x0, x1, y0, y1 = self.viewport
        if not (x0 < x1 and y0 < y1):
            raise ConfigError("viewport must be x_lo < x_hi, y_lo < y_hi")
        w, h = self.resolution
        if not (16 <= w <= 16384 and 16 <= h <= 16384):
            raise ConfigError("resolution must lie in [16, 16384] per axis")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def params(self) -> FamilyParams:
        return FamilyParams(self.p, self.lam)

    def grid(self, scale: int = 1) -> GridSpec:
        x0, x1, y0, y1 = self.viewport
        w, h = self.resolution
        return GridSpec.from_box(x0, x1, y0, y1, w * scale, h * scale)


def _parse_pair(text: str, sep: str, conv) -> tuple:
    parts = [s.strip() for s in text.replace(sep, ",").split(",")]
    return tuple(conv(s) for s in parts)


def _resolution(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    vals = _parse_pair(str(text).lower(), "x", int)
    return vals * 2 if len(vals) == 1 else vals


def _viewport(text) -> tuple:
    if isinstance(text, (tuple, list)):
        vals = tuple(float(v) for v in text)
    else:
        vals = _parse_pair(str(text), ",", float)
    if len(vals) == 1:
        vals = (-vals[0], vals[0], -vals[0], vals[0])
    if len(vals) != 4:
        raise ValueError("viewport takes 1 or 4 numbers")
    return vals


# config-file key -> (RunConfig field, converter)
KEYS = {
    "p": ("p", int),
    "lambda": ("lam", float),
    "nu": ("nu", float),
    "q": ("q", float),
    "escape_radius": ("R", float),
    "r": ("R", float),
    "budget": ("budget", int),
    "viewport": ("viewport", _viewport),
    "resolution": ("resolution", _resolution),
    "t_max": ("t_max", float),
    "out": ("out_dir", str),
    "cache": ("cache_dir", str),
    "threads": ("threads", int),
}


def _canon(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def parse_config(path=None, flags: Optional[dict] = None) -> RunConfig:
    """Read ``key = value`` lines (``#`` starts a comment) and overlay ``flags``.

    Flags with value None are ignored; any other flag value wins over the file.
    """
    values = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            ck = _canon(key)
            if ck not in KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            name, conv = KEYS[ck]
            try:
                values[name] = conv(val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    for key, val in (flags or {}).items():
        if val is None:
            continue
        ck = _canon(key)
        if ck not in KEYS:
            raise ConfigError(f"unknown option {key!r}")
        name, conv = KEYS[ck]
        try:
            values[name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return RunConfig(**values)


@dataclass
class VerificationReport:
    check_id: str
    params: FamilyParams
    status: str
    metrics: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    notes: str = ""
    elapsed_s: float = 0.0

    def to_flat(self) -> dict:
        out = {"check_id": self.check_id, "p": self.params.p, "lambda": self.params.lam, "status": self.status, "notes": self.notes}
        out.update({f"metric.{k}": v for k, v in self.metrics.items()})
        out.update({f"bound.{k}": v for k, v in self.bounds.items()})
        out["elapsed_s"] = self.elapsed_s
        return out

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{self.check_id}.json"
        path.write_text(json.dumps(self.to_flat(), indent=2, sort_keys=False) + "\n")
        return path


# -- helpers -----------------------------------------------------------------

def _rng():
    return np.random.default_rng(SEED)


def _random_disk(n: int, radius: float) -> np.ndarray:
    rng = _rng()
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def _rel_gap(params: FamilyParams, z, other_s, other_m) -> np.ndarray:
    """|f(z) - other| relative to the magnitude scale sum_k |exp(w^k z)| at z."""
    s, m, a = scaled_terms(params, z)
    return np.abs(s - other_s * np.exp(other_m - m)) / a


def _nu(config: RunConfig) -> float:
    if config.nu is not None:
        return config.nu
    return _davel(config.params).nu_prime


_DAVEL_CACHE: dict = {}


def _davel(params: FamilyParams):
    key = (params.p, params.lam)
    if key not in _DAVEL_CACHE:
        _DAVEL_CACHE[key] = estimate_constants(params, list(NU_GRID), list(EPS_GRID), sample_budget=10_000)
    return _DAVEL_CACHE[key]


def _escape(config: RunConfig):
    R = config.R if config.R is not None else find_escape_radius(config.params)
    return R, maxmod_ladder(config.params, R)


# -- checks: each returns (passed, metrics, bounds, notes) ----------------------

def check_sym_omega(config):
    P = config.params
    z = _random_disk(N_RANDOM, 20.0)
    s, m, _ = scaled_terms(P, z * P.omega)
    err = float(_rel_gap(P, z, s, m).max())
    return err <= 1e-12, {"max_rel_err": err, "cases": N_RANDOM}, {"max_rel_err": "<= 1e-12"}, "f(w z) = f(z)"


def check_sym_even(config):
    P = config.params
    z = _random_disk(N_RANDOM, 20.0)
    s, m, _ = scaled_terms(P, -z)
    err = float(_rel_gap(P, z, s, m).max())
    return err <= 1e-12, {"max_rel_err": err, "cases": N_RANDOM}, {"max_rel_err": "<= 1e-12"}, "f(-z) = f(z)"


def check_series(config):
    P = config.params
    z = _random_disk(N_RANDOM, 10.0)
    ser = np.array([evaluate_series(P, complex(v)) for v in z])
    s, m, a = scaled_terms(P, z)
    err = float((np.abs(ser - P.lam * s * np.exp(m)) / (abs(P.lam) * a * np.exp(m))).max())
    return (
        err <= 1e-10,
        {"max_rel_err": err, "cases": N_RANDOM},
        {"max_rel_err": "<= 1e-10"},
        "40-term power series vs scaled evaluation on |z| <= 10, relative to the term-magnitude scale",
    )


def check_cvs_zeros(config):
    P = config.params
    zeros = find_zeros_2d(P, radius=30.0)
    dmax = max((dist_to_rays(P.p, z) for z in zeros), default=math.inf)
    metrics = {"zeros_found": len(zeros), "max_dist_to_rays": dmax}
    bounds = {"max_dist_to_rays": "<= 1e-6", "zeros_found": ">= 1"}
    ok = len(zeros) > 0 and dmax <= 1e-6
    if P.p == 4:
        ref = (math.pi / 2) * (1 + 1j)
        err = min(abs(z - ref) for z in zeros)
        metrics["first_zero_err"] = err
        bounds["first_zero_err"] = "<= 1e-10"
        ok = ok and err <= 1e-10
    return ok, metrics, bounds, "grid minima of |f| on |z| <= 30 polished by Newton"


def _enough_critical(P: FamilyParams, t_max: float, n: int = 20):
    t = t_max
    crit = critical_points_on_ray(P, t)
    while len(crit) < n:
        t *= 1.5
        crit = critical_points_on_ray(P, t)
    return crit[:n], t


def check_cvs_real(config):
    P = config.params
    crit, t = _enough_critical(P, config.t_max)
    ray = np.exp(1j * math.pi / P.p)
    res = float(imag_residual(P, np.asarray(crit) * ray).max())
    return (
        res < 1e-8,
        {"critical_values": len(crit), "max_imag_residual": res, "t_scanned": t},
        {"max_imag_residual": "< 1e-8"},
        "first 20 critical values, origin included",
    )


def check_cvs_interlace(config):
    P = config.params
    data = cached_singular_data(P, config.t_max, config.cache_dir)
    ok = interlacing_holds(data)
    return (
        ok,
        {"zeros": len(data.zeros_t), "critical_points": len(data.crit_t), "interlaced": float(ok), "t_max": data.t_max},
        {"interlaced": "== 1"},
        "exactly one zero between consecutive positive critical points on V_0",
    )


def check_psing_real(config):
    P = config.params
    _, t = _enough_critical(P, config.t_max, 10)
    orb = postsingular_orbit(P, 24, t, n_seeds=10)
    escaped = sum(v is OrbitVerdict.ESCAPES for v in orb.verdicts)
    ok = orb.max_imag_residual < 1e-9 and len(orb.seeds) == 10
    bounds = {"max_imag_residual": "< 1e-9", "seeds": "== 10"}
    notes = "orbits of the first 10 critical values, 24 steps or until overflow"
    if P.is_even and P.lam >= 1:
        ok = ok and escaped == len(orb.seeds)
        bounds["escaped"] = "== seeds"
    else:
        notes += "; escape not required outside p even, lambda >= 1"
    return ok, {"seeds": len(orb.seeds), "escaped": escaped, "max_imag_residual": orb.max_imag_residual}, bounds, notes


def check_davel(config):
    P = config.params
    try:
        est = _davel(P)
    except ConstantsNotFound as exc:
        return False, {}, {"margin": "> 0"}, str(exc)
    return (
        est.margin > 0 and est.samples_checked >= 10_000,
        {"nu_prime": est.nu_prime, "eps0": est.eps0, "margin": est.margin, "samples": est.samples_checked},
        {"margin": "> 0", "samples": ">= 10000"},
        "sampled estimate on T(nu') with |z| <= 10 nu', not a proof",
    )


def sr_map_violations(P: FamilyParams, nu: float, r0: float, n: int = 10_000, r_hi: float = 600.0, seed: int = SEED) -> int:
    """Samples of S_r with |Re z| in [r0, r_hi] where |f(z)| <= |z| or f(z) is not in T_0(nu)."""
    u = qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    x = r0 + (r_hi - r0) * u[:, 0]
    x = np.where(np.arange(n) % 2 == 0, x, -x)
    y = (2 * u[:, 1] - 1) * math.pi / (2 * P.p)
    z = x + 1j * y
    grows = log_abs_f(P, z) > np.log(np.abs(z))
    code, index = classify_points(PartitionConfig(P.p, nu), f_array(P, z))
    in_t0 = (code == CODE_SECTOR) & (index == 0)
    return int(np.count_nonzero(~(grows & in_t0)))


def calibrate_r0(P: FamilyParams, nu: float, candidates=range(1, 20)):
    """Smallest candidate r0 with no violations, or None."""
    for r0 in candidates:
        if sr_map_violations(P, nu, float(r0)) == 0:
            return float(r0)
    return None


def check_sr_map(config):
    P = config.params
    nu = _nu(config)
    r0 = calibrate_r0(P, nu)
    if r0 is None:
        return False, {"nu_prime": nu}, {"r0": "< 20"}, "no r0 below 20 passed"
    return (
        True,
        {"r0": r0, "nu_prime": nu, "samples": 10_000, "violations": 0},
        {"r0": "< 20", "violations": "== 0"},
        "r0 calibrated over integers 1..19; samples on |Re z| in [r0, 600]",
    )


def check_thm2_growth(config):
    P = config.params
    margin = growth_check(P, 50.0, 10_000)
    notes = "min of f(x) - |x| on 10^4 samples of [-50, 50]"
    if not (P.is_even and P.lam >= 1):
        notes += "; hypothesis violated (needs p even and lambda >= 1), result reported only"
    return margin > 0, {"min_margin": margin, "samples": 10_000}, {"min_margin": "> 0"}, notes


def check_thm2_gmin(config):
    worst_val, worst_p, worst_rel = math.inf, None, 0.0
    for p in range(4, 21, 2):
        closed = g_min_closed_form(p)
        _, numeric = g_min_numeric(p)
        worst_rel = max(worst_rel, abs(numeric - closed) / closed)
        if closed < worst_val:
            worst_val, worst_p = closed, p
    return (
        worst_val > 1 and worst_rel <= 1e-9,
        {"g_min_min": worst_val, "worst_p": worst_p, "max_rel_diff": worst_rel, "g_min_p4": g_min_closed_form(4)},
        {"g_min_min": "> 1", "max_rel_diff": "<= 1e-9"},
        "even p from 4 to 20",
    )


BASIN_PARAMS = FamilyParams(4, 0.25)


def check_prop_basin(config):
    P = BASIN_PARAMS
    fps = [fp for fp in real_fixed_points(P, 0.0, math.pi / 2) if 0 < fp.x_star < math.pi / 2]
    f_half_pi = float(f_array(P, complex(math.pi / 2)).real)
    metrics = {"fixed_points": len(fps), "f_at_half_pi": f_half_pi}
    bounds = {"fixed_points": "== 1", "residual": "<= 1e-10", "abs_multiplier": "< 1", "f_at_half_pi": "within 5e-3 of 1.25"}
    ok = len(fps) == 1 and abs(f_half_pi - 1.25) <= 5e-3
    if fps:
        fp = fps[0]
        res = abs(float(f_array(P, complex(fp.x_star)).real) - fp.x_star)
        metrics.update(x_star=fp.x_star, multiplier=fp.multiplier, residual=res)
        ok = ok and res <= 1e-10 * (1 + fp.x_star) and abs(fp.multiplier) < 1
    notes = "always evaluated at p=4, lambda=0.25"
    return ok, metrics, bounds, notes


def _origin_pixel(grid: GridSpec):
    return grid.nearest_pixel(0j)


def check_sw_rings(config):
    P = config.params
    x0, x1, y0, y1 = config.viewport
    if not (x0 < 0 < x1 and y0 < 0 < y1):
        return False, {}, {"nested_count": ">= 2"}, "viewport does not contain the origin"
    R, ladder = _escape(config)
    counts = []
    for scale in (1, 2):
        grid = config.grid(scale)
        codes, _ = classification_grid(P, grid, config.budget, R, ladder, threads=config.threads)
        counts.append(spider_rings(codes, _origin_pixel(grid)).nested_count)
    return (
        counts[0] >= 2 and counts[0] == counts[1],
        {"nested_count": counts[0], "nested_count_double": counts[1], "escape_radius": R, "budget": config.budget},
        {"nested_count": ">= 2", "nested_count_double": "== nested_count"},
        "rings of A_R(f) pixels (level 0) around the origin",
    )


def hair_window(p: int, q: float, k: int = 1):
    """Re-interval [x_lo, x_lo + 40] of R(k) to the right of where the strip Q_0 leaves it."""
    s, c = math.sin(math.pi / p), math.cos(math.pi / p)
    exit_x = ((2 * k + 1) * math.pi * c + q) / s
    x_lo = max(20.0, math.ceil(exit_x))
    return x_lo, x_lo + 40.0


def check_hair_strip(config):
    P = config.params
    k = 1
    q = config.q if config.q is not None else min_strip_half_width(P.p)
    x_lo, x_hi = hair_window(P.p, q, k)
    R, ladder = _escape(config)
    found = []
    for scale in (1, 2):
        grid = GridSpec.from_box(x_lo, x_hi, (2 * k - 1) * math.pi, (2 * k + 1) * math.pi, 256 * scale, 64 * scale)
        found.append(strip_hair_presence(P, k, grid, 12, R=R, ladder=ladder, threads=config.threads))
    return (
        all(found),
        {"k": k, "x_lo": x_lo, "x_hi": x_hi, "crossing": float(found[0]), "crossing_double": float(found[1])},
        {"crossing": "== 1", "crossing_double": "== 1"},
        "numerical evidence of a hair crossing the strip window, not a proof",
    )


CHECKS = {
    "SYM-OMEGA": check_sym_omega,
    "SYM-EVEN": check_sym_even,
    "SERIES": check_series,
    "CVS-ZEROS": check_cvs_zeros,
    "CVS-REAL": check_cvs_real,
    "CVS-INTERLACE": check_cvs_interlace,
    "PSING-REAL": check_psing_real,
    "DAVEL-SAMPLED": check_davel,
    "SR-MAP": check_sr_map,
    "THM2-GROWTH": check_thm2_growth,
    "THM2-GMIN": check_thm2_gmin,
    "PROP-BASIN": check_prop_basin,
    "SW-RINGS": check_sw_rings,
    "HAIR-STRIP": check_hair_strip,
}


def skip_reason(config: RunConfig, check_id: str) -> Optional[str]:
    """Why ``run_all`` skips a check for this configuration, or None."""
    P = config.params
    if check_id in ("SYM-EVEN", "SR-MAP") and not P.is_even:
        return "p odd"
    if check_id == "THM2-GROWTH":
        if not P.is_even:
            return "p odd"
        if P.lam < 1:
            return "lambda < 1"
    if check_id == "PROP-BASIN" and (P.p, P.lam) != (4, 0.25):
        return "different lambda: requires p=4, lambda=0.25"
    return None


def _report_params(config: RunConfig, check_id: str) -> FamilyParams:
    return BASIN_PARAMS if check_id == "PROP-BASIN" else config.params


def run_check(config: RunConfig, check_id: str, write: bool = True) -> VerificationReport:
    """Execute one check and write its JSON report to ``config.out_dir``."""
    cid = check_id.upper()
    if cid not in CHECKS:
        raise UnknownCheck(f"unknown check {check_id!r}; known: {', '.join(CHECK_IDS)}")
    t0 = time.perf_counter()
    ok, metrics, bounds, notes = CHECKS[cid](config)
    rep = VerificationReport(
        check_id=cid,
        params=_report_params(config, cid),
        status="PASS" if ok else "FAIL",
        metrics={k: (float(v) if isinstance(v, (int, float, np.floating, np.integer)) else v) for k, v in metrics.items()},
        bounds=bounds,
        notes=notes,
        elapsed_s=round(time.perf_counter() - t0, 3),
    )
    if write:
        rep.write(config.out_dir)
    return rep


def run_all(config: RunConfig, parallel: bool = False, write: bool = True) -> list:
    """Run every check, marking hypothesis-mismatched ones SKIPPED."""
    todo, reports = [], {}
    for cid in CHECK_IDS:
        reason = skip_reason(config, cid)
        if reason is None:
            todo.append(cid)
        else:
            rep = VerificationReport(cid, _report_params(config, cid), "SKIPPED", notes=reason)
            if write:
                rep.write(config.out_dir)
            reports[cid] = rep
    if parallel:
        with ThreadPoolExecutor(max_workers=min(4, len(todo))) as pool:
            for cid, rep in zip(todo, pool.map(lambda c: run_check(config, c, write), todo)):
                reports[cid] = rep
    else:
        for cid in todo:
            reports[cid] = run_check(config, cid, write)
    return [reports[cid] for cid in CHECK_IDS]


def exit_status(reports) -> int:
    """0 iff no applicable check failed."""
    return 1 if any(r.status == "FAIL" for r in reports) else 0
