import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from scipy.integrate import quad, solve_ivp

from conftest import above_one
from jflow.cohomology import average_constant, blowup_p3
from jflow.errors import DomainError, NoDestabilizerError
from jflow.ruled.analysis import (
    CONICAL,
    CURRENT,
    SMOOTH,
    RuledParams,
    analyze,
    classify,
    defect_l2,
    destabilizer,
    futaki_smooth,
    lambda_closed_form,
    limit_profile,
    remark_check,
    solve_lambda,
)

SIX_FIFTHS = RuledParams(Fraction(6, 5), 3)
# Frozen from the cubic λ³ - 32.4λ + 54 (numpy.roots) and a split quad of the defect integrand.
LAMBDA_6_5 = 1.8677740405186
DEFECT_6_5 = 0.33058862119308


def cubic_root(a, b):
    roots = np.roots([1.0, 0.0, -3 * a * b * b, 2 * b**3])
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and 1 < r.real < b]
    assert len(real) == 1
    return real[0]


def defect_by_quadrature(a, b, lam):
    c = 3 * (a * b * b - 1) / (b**3 - 1)
    h = lambda t: 2 / t - c if t <= lam else 2 / lam - c
    head = quad(lambda t: h(t) ** 2 * t * t / 2, 1, lam, epsabs=1e-14)[0]
    tail = quad(lambda t: h(t) ** 2 * t * t / 2, lam, b, epsabs=1e-14)[0]
    return math.sqrt(head + tail)


@pytest.mark.parametrize("a,b", [(1, 2), (2, 1), (0, 5), (Fraction(1, 2), 3)])
def test_params_require_above_one(a, b):
    with pytest.raises(DomainError, match="requires [ab] > 1"):
        RuledParams(a, b)


def test_float_params_are_not_exact():
    p = RuledParams(1.2, 3.0)
    assert not p.exact
    with pytest.raises(TypeError):
        p.require_exact()


def test_classify_examples():
    info = classify(RuledParams(5, 10))
    assert (info.ratio, info.case, info.c) == (Fraction(499, 999), CURRENT, Fraction(499, 333))
    info = classify(RuledParams(2, 2))
    assert (info.ratio, info.case, info.c) == (1, SMOOTH, 3)
    assert classify(RuledParams(Fraction(17, 12), 2)).case == CONICAL


def test_remark_check_examples():
    r = remark_check(RuledParams(5, 10))
    assert r.margin_e0 == Fraction(-167, 333)
    assert r.critical_class == (Fraction(3325, 333), Fraction(166, 333))
    assert r.kahler
    r = remark_check(RuledParams(2, 2))
    assert r.margin_e0 == 1 and r.kahler
    r = remark_check(RuledParams(4, 4))
    assert r.margin_e0 == 1 and r.kahler


def test_lambda_six_fifths():
    lam = solve_lambda(SIX_FIFTHS)
    assert lam == pytest.approx(LAMBDA_6_5, abs=1e-12)
    assert lam == pytest.approx(cubic_root(1.2, 3.0), abs=1e-12)
    assert lam == pytest.approx(lambda_closed_form(SIX_FIFTHS), abs=1e-12)


def test_lambda_boundary_and_smooth():
    assert solve_lambda(RuledParams(Fraction(17, 12), 2)) == 1.0
    with pytest.raises(NoDestabilizerError):
        solve_lambda(RuledParams(2, 2))


def test_lambda_cubic_sign_at_one():
    # cubic(1) = 3(b³-1)(2/3 - ratio), so a root in (1, b) exists exactly in the current case
    for a, b in [(5, 10), (2, 2), (Fraction(6, 5), 3), (Fraction(17, 12), 2)]:
        p = RuledParams(a, b)
        value = 1 - 3 * p.a * p.b**2 + 2 * p.b**3
        assert value == 3 * (p.b**3 - 1) * (Fraction(2, 3) - p.ratio)


def test_limit_profile_current():
    lam = solve_lambda(SIX_FIFTHS)
    prof = limit_profile(SIX_FIFTHS, num=2001)
    assert prof.F[-1] == pytest.approx(1.2, abs=1e-10)
    G_at_lam = lam**2 / (3 * lam**2) + 2 * lam / (3 * lam)
    assert G_at_lam == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(prof.F) >= -1e-14)
    assert np.all(prof.F >= 1 - 1e-14)
    # independent ODE oracle for G on [λ, b]
    sol = solve_ivp(lambda t, y: 2 / lam - 2 * y / t, (lam, 3.0), [1.0], rtol=1e-12, atol=1e-14, dense_output=True)
    tail = prof.tau > lam
    assert np.max(np.abs(sol.sol(prof.tau[tail])[0] - prof.F[tail])) < 1e-9


def test_limit_profile_smooth_solves_ode():
    p = RuledParams(2, 2)
    tau = np.linspace(1.1, 1.9, 41)
    delta = 1e-5
    F = limit_profile(p, grid=tau).F
    dF = (limit_profile(p, grid=tau + delta).F - limit_profile(p, grid=tau - delta).F) / (2 * delta)
    assert np.max(np.abs(dF + 2 * F / tau - 3)) < 1e-8
    ends = limit_profile(p, grid=[1.0, 2.0]).F
    assert ends == pytest.approx([1.0, 2.0], abs=1e-12)


@pytest.mark.parametrize("grid", [[0.5, 1.5], [1.0, 4.0], [1.5, 1.2], [[1.0, 1.2]]])
def test_limit_profile_bad_grid(grid):
    with pytest.raises(DomainError):
        limit_profile(RuledParams(2, 2), grid=grid)


def test_destabilizer_values():
    h = destabilizer(SIX_FIFTHS)
    assert h(1.0) == pytest.approx(2 - 147 / 130, abs=1e-14)
    assert float(h(1.0)) == pytest.approx(0.86923, abs=1e-5)
    assert float(h(3.0)) == pytest.approx(-0.059976, abs=1e-6)
    assert h.weighted_mean() == pytest.approx(0.0, abs=1e-10)
    tau = np.linspace(1, 3, 1001)
    vals = h(tau)
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all(np.diff(vals, 2) >= -1e-12)


def test_destabilizer_boundary_case_is_constant():
    h = destabilizer(RuledParams(Fraction(17, 12), 2))
    tau = np.linspace(1, 2, 11)
    centred = h(tau) - h.weighted_mean()
    assert np.max(np.abs(centred)) < 1e-12


def test_destabilizer_smooth_case():
    with pytest.raises(NoDestabilizerError):
        destabilizer(RuledParams(2, 2))


def test_defect_l2_values():
    assert defect_l2(SIX_FIFTHS) == pytest.approx(DEFECT_6_5, abs=1e-12)
    assert defect_l2(SIX_FIFTHS) == pytest.approx(defect_by_quadrature(1.2, 3.0, cubic_root(1.2, 3.0)), abs=1e-11)
    assert defect_l2(RuledParams(2, 2)) == 0
    assert defect_l2(RuledParams(Fraction(17, 12), 2)) == 0


def test_defect_squared_is_minus_futaki():
    h = destabilizer(SIX_FIFTHS)
    assert abs(defect_l2(SIX_FIFTHS) ** 2 + futaki_smooth(SIX_FIFTHS, h, [h.lam])) < 1e-8


def test_analyze_fills_fields():
    info = analyze(SIX_FIFTHS)
    assert info.lam == pytest.approx(LAMBDA_6_5, abs=1e-12)
    assert info.defect_l2 == pytest.approx(DEFECT_6_5, abs=1e-12)
    smooth = analyze(RuledParams(2, 2))
    assert smooth.lam is None and smooth.defect_l2 == 0


@given(above_one(hi=6), above_one(hi=6))
def test_threshold_equivalences(a, b):
    p = RuledParams(a, b)
    info = classify(p)
    current = info.case == CURRENT
    assert current == (remark_check(p).margin_e0 < 0) == (p.ratio < Fraction(2, 3))
    X = blowup_p3()
    assert info.c == average_constant(X, X.vector(a, -1), X.vector(b, -1))
    if current:
        lam = solve_lambda(p)
        assert 1 < lam < float(b)
        assert lam == pytest.approx(cubic_root(float(a), float(b)), abs=1e-9)
