import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mp_f
from esdl.evalcore import (
    LOG_MAX,
    FamilyParams,
    ScaledComplex,
    derivative,
    evaluate,
    evaluate_series,
    f_array,
    find_escape_radius,
    imag_residual,
    log_abs_f,
    max_modulus,
    maxmod_ladder,
    roots_of_unity,
    scaled_terms,
)

ps = st.sampled_from([3, 4, 5, 6, 8])
lams = st.sampled_from([1.0, 0.25, -1.0, 2.0, -0.5])


def zs(radius=10.0):
    return st.builds(complex, st.floats(-radius, radius), st.floats(-radius, radius))


# -- parameters ---------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 1, 0, -3, 3.5])
def test_params_reject_small_or_fractional_p(p):
    with pytest.raises(ValueError):
        FamilyParams(p, 1.0)


@pytest.mark.parametrize("lam", [0.0, math.inf, math.nan])
def test_params_reject_bad_lambda(lam):
    with pytest.raises(ValueError):
        FamilyParams(4, lam)


def test_roots_of_unity_exact_on_axes_and_conjugate():
    w = roots_of_unity(4)
    assert list(w) == [1, 1j, -1, -1j]
    for p in (3, 5, 7, 12):
        w = roots_of_unity(p)
        for k in range(1, p):
            assert w[p - k] == np.conj(w[k])
        assert np.allclose(w**p, 1)


# -- scaled numbers --------------------------------------------------------------

def test_scaled_zero():
    z = ScaledComplex.from_complex(0)
    assert z.is_zero and z.log_abs == -math.inf and z.to_complex() == 0


@given(zs(1e6))
def test_scaled_roundtrip_and_unit_range(c):
    s = ScaledComplex.from_complex(c)
    if c == 0:
        return
    assert 1 <= abs(s.unit) < math.e * (1 + 1e-15)
    assert abs(s.to_complex() - c) <= 1e-14 * abs(c)


@given(zs(100), zs(100))
def test_scaled_mul_div(a, b):
    if a == 0 or b == 0:
        return
    A, B = ScaledComplex.from_complex(a), ScaledComplex.from_complex(b)
    assert abs((A * B).to_complex() - a * b) <= 1e-13 * abs(a * b)
    assert abs((A / B).to_complex() - a / b) <= 1e-13 * abs(a / b)


def test_scaled_beyond_double_range():
    big = ScaledComplex.from_parts(1 + 1j, 5000.0)
    assert not big.representable
    assert big.log_abs == pytest.approx(5000 + 0.5 * math.log(2), rel=1e-15)
    assert big.to_complex().real == math.inf


# -- evaluation ---------------------------------------------------------------------

def test_value_at_origin_is_lambda_p():
    for p in (3, 4, 7):
        for lam in (1.0, -0.25):
            assert evaluate(FamilyParams(p, lam), 0).to_complex() == pytest.approx(lam * p, rel=1e-15)


def test_quarter_at_half_pi(quarter):
    # (cos x + cosh x) / 2 at pi/2, high-precision oracle 1.254589239329...
    got = evaluate(quarter, math.pi / 2).to_complex()
    assert got.real == pytest.approx(1.2545892393290283, rel=1e-14)
    assert abs(got.imag) < 1e-15
    # reported as approximately 1.25
    assert abs(got.real - 1.25) < 5e-3


def test_quarter_derivative_at_one(quarter):
    # (sinh 1 - sin 1) / 2
    got = derivative(quarter, 1.0).to_complex()
    assert got.real == pytest.approx(0.166865104417952, rel=1e-12)


def test_huge_argument_does_not_overflow(unit):
    v = evaluate(unit, 1000.0)
    assert not v.representable
    assert v.log_abs == pytest.approx(1000.0, rel=1e-15)
    v = evaluate(unit, 1e5 * cmath.exp(0.3j))
    assert math.isfinite(v.log_abs)


@pytest.mark.parametrize("p,lam,z", [
    (4, 1.0, 2 + 1j),
    (4, 0.25, -3 + 7j),
    (3, 1.0, 20 - 5j),
    (5, -2.0, 0.1 + 0.2j),
    (6, 1.0, 40 + 40j),
    (8, 0.5, -100 + 3j),
])
def test_evaluate_matches_high_precision(p, lam, z):
    ref = complex(mp_f(p, lam, z))
    got = evaluate(FamilyParams(p, lam), z).to_complex()
    assert abs(got - ref) <= 1e-12 * abs(ref)
    dref = complex(mp_f(p, lam, z, deriv=True))
    dgot = derivative(FamilyParams(p, lam), z).to_complex()
    assert abs(dgot - dref) <= 1e-12 * abs(dref)


def test_log_abs_far_beyond_range_matches_high_precision():
    z = 900 + 5j
    ref = float(mpmath.log(abs(mp_f(4, 1.0, z))))
    assert evaluate(FamilyParams(4, 1.0), z).log_abs == pytest.approx(ref, rel=1e-14)


def test_series_value(unit):
    # 2 cosh 2 + 2 cos 2
    assert evaluate_series(unit, 2.0).real == pytest.approx(6.692098, abs=1e-6)
    assert evaluate_series(unit, 2.0).real == pytest.approx(2 * math.cosh(2) + 2 * math.cos(2), rel=1e-14)


def test_series_domain_guard(unit):
    with pytest.raises(ValueError):
        evaluate_series(unit, 50.5)
    with pytest.raises(ValueError):
        evaluate_series(unit, 1.0, n_terms=0)


# -- symmetry properties ---------------------------------------------------------------

def _scale(params, z):
    """|lam| sum_k |exp(w^k z)|, the size of the terms being summed."""
    _, m, a = scaled_terms(params, z)
    return abs(params.lam) * float(a) * math.exp(float(m))


@given(ps, lams, zs(20))
def test_rotation_invariance(p, lam, z):
    P = FamilyParams(p, lam)
    a = evaluate(P, z).to_complex()
    b = evaluate(P, z * P.omega).to_complex()
    assert abs(a - b) <= 1e-12 * _scale(P, z)


@given(st.sampled_from([4, 6, 8]), lams, zs(20))
def test_even_p_gives_even_function(p, lam, z):
    P = FamilyParams(p, lam)
    assert abs(evaluate(P, z).to_complex() - evaluate(P, -z).to_complex()) <= 1e-12 * _scale(P, z)


@given(ps, lams, zs(20))
def test_schwarz_reflection(p, lam, z):
    P = FamilyParams(p, lam)
    a = evaluate(P, z.conjugate()).to_complex()
    b = evaluate(P, z).to_complex().conjugate()
    assert abs(a - b) <= 1e-12 * _scale(P, z)


@given(ps, lams, zs(10))
def test_series_agrees_with_evaluation(p, lam, z):
    P = FamilyParams(p, lam)
    assert abs(evaluate_series(P, z) - evaluate(P, z).to_complex()) <= 1e-10 * _scale(P, z)


@given(ps, lams, zs(8))
def test_derivative_matches_central_difference(p, lam, z):
    P = FamilyParams(p, lam)
    h = 1e-5 * max(1.0, abs(z))
    fd = (f_array(P, z + h) - f_array(P, z - h)) / (2 * h)
    d = derivative(P, z).to_complex()
    assert abs(fd - d) <= 1e-5 * _scale(P, z)


@given(ps, lams, st.floats(-30, 30))
def test_real_axis_values_are_real(p, lam, x):
    assert imag_residual(FamilyParams(p, lam), complex(x)) < 1e-15


# -- maximum modulus ------------------------------------------------------------------

def test_max_modulus_rejects_bad_radius(unit):
    with pytest.raises(ValueError):
        max_modulus(unit, 0.0)
    with pytest.raises(ValueError):
        max_modulus(unit, 1.0, n_samples=100)


@pytest.mark.parametrize("p,lam,r", [(4, 1.0, 5.0), (4, 0.25, 2.0), (3, 1.0, 7.0), (6, -1.0, 3.0), (5, 2.0, 30.0)])
def test_max_modulus_against_dense_sampling(p, lam, r):
    P = FamilyParams(p, lam)
    theta = np.linspace(0, 2 * np.pi, 200_001)
    dense = float(log_abs_f(P, r * np.exp(1j * theta)).max())
    got = max_modulus(P, r)
    # the refined maximum is at least the dense one, and not above it by more than grid error
    assert got >= dense - 1e-12
    assert got - dense <= 1e-8 * max(1, abs(dense))


def test_max_modulus_p4_at_five(unit):
    # attained on the real axis: log(2 cosh 5 + 2 cos 5)
    assert max_modulus(unit, 5.0) == pytest.approx(math.log(2 * math.cosh(5) + 2 * math.cos(5)), rel=1e-12)
    assert max_modulus(unit, 5.0) == pytest.approx(math.log(148.98722142050214), rel=1e-12)


def test_ladder_r10(unit):
    lad = maxmod_ladder(unit, 10.0)
    # log M(10) = log(2 cosh 10 + 2 cos 10)
    assert lad.levels[0] == pytest.approx(math.log(2 * math.cosh(10) + 2 * math.cos(10)), rel=1e-12)
    assert lad.saturated_at is not None and lad.saturated_at <= 3
    assert lad.levels[lad.saturated_at] > LOG_MAX
    assert lad.n_checked == lad.saturated_at


@given(ps, st.sampled_from([1.0, 2.0]), st.sampled_from([1.0, 2.0, 4.0, 10.0]))
@settings(max_examples=30)
def test_ladder_is_increasing(p, lam, R):
    P = FamilyParams(p, lam)
    lad = maxmod_ladder(P, R)
    seq = [lad.base_log] + lad.levels
    assert all(b > a for a, b in zip(seq, seq[1:]))


def test_ladder_requires_growth():
    with pytest.raises(ValueError):
        maxmod_ladder(FamilyParams(4, 1e-3), 1.0)


@pytest.mark.parametrize("lam,expected", [(1.0, 1.0), (0.25, 4.0)])
def test_escape_radius(lam, expected):
    P = FamilyParams(4, lam)
    R = find_escape_radius(P)
    assert R == expected
    rs = np.geomspace(R, 8 * R, 64)
    assert all(max_modulus(P, float(r)) > math.log(r) for r in rs)
