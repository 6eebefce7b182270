"""Overflow-safe evaluation of f(z) = lam * sum_k exp(w^k z), w = exp(2 pi i / p).

Every evaluation goes through the factored form

    f(z) = lam * e^m * sum_k exp(w^k z - m),    m = max_k Re(w^k z),

so no intermediate leaves the native float range for any finite z whose
exponents fit in a double.  Values are returned as :class:`ScaledComplex`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

# log of the largest finite double, rounded down
LOG_MAX = 709.0

SERIES_MAX_ABS = 50.0


@dataclass(frozen=True)
class FamilyParams:
    """One member (p, lam) of the exponential-sum family."""

    p: int
    lam: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise ValueError(f"p must be an integer with p >= 3, got {self.p!r}")
        if not math.isfinite(self.lam) or self.lam == 0:
            raise ValueError(f"lambda must be a nonzero real, got {self.lam!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def omega(self) -> complex:
        return complex(roots_of_unity(self.p)[1])

    @property
    def is_even(self) -> bool:
        return self.p % 2 == 0


def roots_of_unity(p: int) -> np.ndarray:
    """The p-th roots of unity w^k, k = 0..p-1, with exact zeros snapped and w^(p-k) = conj(w^k)."""
    ang = 2.0 * np.pi * np.arange(p) / p
    c, s = np.cos(ang), np.sin(ang)
    c[np.abs(c) < 1e-15] = 0.0
    s[np.abs(s) < 1e-15] = 0.0
    w = c + 1j * s
    # exact conjugate pairs keep f real on the real axis even for huge arguments
    k = np.arange(p // 2 + 1, p)
    w[k] = np.conj(w[p - k])
    return w


@dataclass(frozen=True)
class ScaledComplex:
    """A complex number stored as ``unit * exp(log_scale)``.

    ``|unit|`` lies in [1, e) and ``log_scale`` is an integer-valued float, except
    for zero which is ``unit = 0, log_scale = 0``.
    """

    unit: complex
    log_scale: float

    @classmethod
    def from_parts(cls, c: complex, log_scale: float = 0.0) -> "ScaledComplex":
        c = complex(c)
        if c == 0:
            return cls(0j, 0.0)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)) or not math.isfinite(log_scale):
            raise OverflowError("ScaledComplex parts must be finite")
        scale = math.floor(log_scale + math.log(abs(c)))
        # rescale by exp of the (nearly integer) offset; halves keep tiny c from overflowing it
        half = math.exp(0.5 * (log_scale - scale))
        unit = c * half * half
        if abs(unit) >= math.e:
            unit, scale = unit / math.e, scale + 1
        elif abs(unit) < 1:
            unit, scale = unit * math.e, scale - 1
        return cls(unit, float(scale))

    @classmethod
    def from_complex(cls, c: complex) -> "ScaledComplex":
        return cls.from_parts(c, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def log_abs(self) -> float:
        if self.is_zero:
            return -math.inf
        return self.log_scale + math.log(abs(self.unit))

    @property
    def arg(self) -> float:
        return math.atan2(self.unit.imag, self.unit.real)

    @property
    def representable(self) -> bool:
        return self.is_zero or self.log_abs <= LOG_MAX

    def to_complex(self) -> complex:
        """Plain complex value; components overflow to inf when not representable."""
        if self.is_zero:
            return 0j
        if self.log_scale > LOG_MAX + 1:
            return complex(
                math.copysign(math.inf, self.unit.real) if self.unit.real else 0.0,
                math.copysign(math.inf, self.unit.imag) if self.unit.imag else 0.0,
            )
        return self.unit * math.exp(self.log_scale)

    def __mul__(self, other: "ScaledComplex") -> "ScaledComplex":
        if self.is_zero or other.is_zero:
            return ScaledComplex(0j, 0.0)
        return ScaledComplex.from_parts(self.unit * other.unit, self.log_scale + other.log_scale)

    def __truediv__(self, other: "ScaledComplex") -> "ScaledComplex":
        if other.is_zero:
            raise ZeroDivisionError("division by zero ScaledComplex")
        if self.is_zero:
            return ScaledComplex(0j, 0.0)
        return ScaledComplex.from_parts(self.unit / other.unit, self.log_scale - other.log_scale)


# -- array kernels -----------------------------------------------------------

def scaled_terms(params: FamilyParams, z, weighted: bool = False):
    """Return ``(s, m, a)`` with f(z) = lam * e^m * s elementwise.

    ``a`` is ``sum_k |exp(w^k z - m)|``, so ``|lam| e^m a`` is the natural
    magnitude scale of the sum (used for cancellation-aware residuals).
    With ``weighted=True`` the terms carry the factor w^k, giving f'(z).
    """
    w = roots_of_unity(params.p)
    e = np.multiply.outer(np.asarray(z, dtype=complex), w)
    m = e.real.max(axis=-1)
    ex = np.exp(e - m[..., None])
    a = np.abs(ex).sum(axis=-1)
    if weighted:
        ex = ex * w
    s = ex.sum(axis=-1)
    return s, m, a


def log_abs_f(params: FamilyParams, z) -> np.ndarray:
    """log|f(z)| elementwise; -inf at exact zeros."""
    s, m, _ = scaled_terms(params, z)
    with np.errstate(divide="ignore"):
        return m + np.log(abs(params.lam) * np.abs(s))


def f_array(params: FamilyParams, z) -> np.ndarray:
    """Plain complex f(z) elementwise (inf where the value overflows)."""
    s, m, _ = scaled_terms(params, z)
    with np.errstate(over="ignore", invalid="ignore"):
        return params.lam * s * np.exp(m)


def imag_residual(params: FamilyParams, z) -> np.ndarray:
    """|Im f(z)| divided by the magnitude scale |lam| sum_k |exp(w^k z)|."""
    s, _, a = scaled_terms(params, z)
    return np.abs(s.imag) / a


# -- operations --------------------------------------------------------------

def _scaled(params: FamilyParams, z: complex, weighted: bool) -> ScaledComplex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("z must be finite")
    s, m, _ = scaled_terms(params, z, weighted=weighted)
    return ScaledComplex.from_parts(params.lam * complex(s), float(m))


def evaluate(params: FamilyParams, z: complex) -> ScaledComplex:
    """f(z) in scaled form."""
    return _scaled(params, z, weighted=False)


def derivative(params: FamilyParams, z: complex) -> ScaledComplex:
    """f'(z) = lam * sum_k w^k exp(w^k z) in scaled form."""
    return _scaled(params, z, weighted=True)


def evaluate_series(params: FamilyParams, z: complex, n_terms: int = 40) -> complex:
    """Power series lam * p * sum_{j < n_terms} z^(jp) / (jp)!.

    Only the powers divisible by p survive the sum over roots of unity.  Terms
    are accumulated in increasing j.  The truncation is exact to double
    precision once ``n_terms * p`` is well past ``e * |z|``; 40 terms cover
    |z| <= 10 for every p >= 3.
    """
    z = complex(z)
    if abs(z) > SERIES_MAX_ABS:
        raise ValueError(f"series evaluation requires |z| <= {SERIES_MAX_ABS}, got |z| = {abs(z):.6g}")
    if n_terms < 1:
        raise ValueError("n_terms must be positive")
    p = params.p
    zp = z**p
    term = 1.0 + 0j
    total = term
    for j in range(1, n_terms):
        denom = 1.0
        for i in range((j - 1) * p + 1, j * p + 1):
            denom *= i
        term = term * zp / denom
        total += term
    return params.lam * p * total


def _golden_max(fun, lo: float, mid: float, hi: float, xtol: float):
    """Maximise fun on a bracket whose middle sample is the best of three."""
    flo, fmid, fhi = fun(lo), fun(mid), fun(hi)
    if not (fmid > flo and fmid > fhi):
        return mid, fmid
    x = optimize.golden(lambda t: -fun(t), brack=(lo, mid, hi), tol=xtol)
    fx = fun(x)
    return (x, fx) if fx >= fmid else (mid, fmid)


def max_modulus(params: FamilyParams, r: float, n_samples: int = 1024) -> float:
    """log M(r, f), the log of max |f| over the circle |z| = r.

    f(w z) = f(z), so one sector [0, 2 pi / p) of the circle suffices.  The best
    of ``n_samples`` equally spaced angles is refined by golden-section search
    inside its neighbouring samples.
    """
    if not r > 0:
        raise ValueError(f"max_modulus requires r > 0, got {r!r}")
    if n_samples < 1024:
        raise ValueError("at least 1024 angular samples are required")
    period = 2.0 * math.pi / params.p
    step = period / n_samples
    theta = np.arange(n_samples) * step
    vals = log_abs_f(params, r * np.exp(1j * theta))
    i = int(np.argmax(vals))
    best = float(vals[i])

    def fun(t):
        return float(log_abs_f(params, r * complex(math.cos(t), math.sin(t))))

    # golden's tol is relative to the bracket midpoint, so search in u = 1 + (t - t0)
    th0 = theta[i]
    _, refined = _golden_max(lambda u: fun(th0 + u - 1.0), 1.0 - step, 1.0, 1.0 + step, 1e-10)
    return max(best, refined)


@dataclass
class MaxModLadder:
    """Iterated maximum modulus: ``levels[n] = log M^(n+1)(R, f)``."""

    base_log: float
    levels: list = field(default_factory=list)
    saturated_at: Optional[int] = None

    @property
    def n_checked(self) -> int:
        """Number of levels usable as escape bounds (those below saturation)."""
        return self.saturated_at if self.saturated_at is not None else len(self.levels)


def maxmod_ladder(params: FamilyParams, R: float, n_max: int = 8) -> MaxModLadder:
    """Build log M^n(R, f) for n = 1..n_max, stopping at the first unrepresentable level."""
    if n_max < 1:
        raise ValueError("n_max must be positive")
    base = math.log(R)
    first = max_modulus(params, R)
    if not first > base:
        raise ValueError(f"M(R,f) <= R for R = {R}; choose a larger escape radius")
    ladder = MaxModLadder(base_log=base, levels=[first])
    if first > LOG_MAX:
        ladder.saturated_at = 0
        return ladder
    while len(ladder.levels) < n_max:
        nxt = max_modulus(params, math.exp(ladder.levels[-1]))
        ladder.levels.append(nxt)
        if nxt > LOG_MAX:
            ladder.saturated_at = len(ladder.levels) - 1
            break
    return ladder


def find_escape_radius(params: FamilyParams, n_check: int = 64) -> float:
    """Smallest R in {1, 2, 4, ...} with sampled M(r, f) > r on [R, 8R].

    This is a sampled heuristic: the 64 log-spaced radii are checked, nothing
    in between.
    """
    for e in range(21):
        R = float(2**e)
        rs = np.geomspace(R, 8 * R, n_check)
        if all(max_modulus(params, float(r)) > math.log(r) for r in rs):
            return R
    raise RuntimeError("no escape radius <= 2**20 found")
