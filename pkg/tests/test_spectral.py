import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rsgbm.ctmc import RegimeModel, TwoStateModel
from rsgbm.errors import DomainError
from rsgbm.spectral import (AlmostSureLimit, RecurrenceClass, almost_sure_growth, build_Ap,
                            classify, eig2x2, eigenvalues, eta_p, lyapunov_curve)

from conftest import random_generator

EXAMPLE = TwoStateModel(1.0, 1.0, (0.1, -0.1), (0.2, 0.2))


def test_build_Ap():
    assert np.array_equal(build_Ap(EXAMPLE, 0), EXAMPLE.regime.Q)
    assert np.allclose(build_Ap(EXAMPLE, 1), [[-0.9, 1], [1, -1.1]], atol=1e-15)
    with pytest.raises(DomainError):
        build_Ap(EXAMPLE, -1)


def test_eta_1_closed_value():
    assert eta_p(EXAMPLE, 1) == pytest.approx(1 - math.sqrt(1.01), abs=1e-14)


@given(st.floats(-2, 2), st.floats(0.01, 2), st.sampled_from([0.5, 1.0, 2.0, 5.0]))
def test_single_regime(mu, sigma, p):
    m = RegimeModel([[0.0]], [mu], [sigma])
    assert abs(-eta_p(m, p) - (p * mu + p * (p - 1) * sigma ** 2 / 2)) <= 1e-12


def test_eta_zero(rng):
    for _ in range(100):
        n = int(rng.integers(1, 9))
        m = RegimeModel(random_generator(rng, n, 0.4), rng.uniform(-1, 1, n),
                        rng.uniform(0.1, 1, n))
        assert abs(eta_p(m, 0)) <= 1e-10


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_eig2x2_matches_closed_form(entries):
    A = np.array(entries).reshape(2, 2)
    got = np.sort_complex(eigenvalues(A))
    ref = np.sort_complex(eig2x2(A))
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1, np.abs(A).max())


def test_eigenvalues_against_characteristic_polynomial(rng):
    for _ in range(20):
        n = int(rng.integers(3, 9))
        A = random_generator(rng, n) + np.diag(rng.normal(size=n))
        ev = eigenvalues(A)
        coeffs = np.poly(A)
        resid = np.abs(np.polyval(coeffs, ev)) / np.polyval(np.abs(coeffs), np.abs(ev))
        assert np.max(resid) < 1e-10


def test_lyapunov_curve_convex_and_slope(rng):
    grid = np.linspace(0, 5, 51)
    curve = lyapunov_curve(EXAMPLE, grid)
    assert curve.convexity_violations == []
    assert curve.growth_rate[0] == 0
    h = 1e-4
    slope = -eta_p(EXAMPLE, h) / h
    assert abs(slope - almost_sure_growth(EXAMPLE)) <= 1e-3
    for _ in range(10):
        n = int(rng.integers(2, 7))
        m = RegimeModel(random_generator(rng, n), rng.uniform(-1, 1, n), rng.uniform(0.1, 1, n))
        assert lyapunov_curve(m, grid).convexity_violations == []


def test_lyapunov_single_regime_parabola():
    m = RegimeModel([[0.0]], [0.3], [0.5])
    curve = lyapunov_curve(m, [0.0, 1.0, 2.0, 3.0])
    assert np.allclose(curve.growth_rate, [0.3 * p + p * (p - 1) * 0.125 for p in range(4)],
                       atol=1e-15)
    text = curve.to_csv()
    assert text.splitlines()[0] == "p,growth_rate,eta_p,max_eig_real,max_eig_imag"
    assert text.splitlines()[1] == "0,0,0,0,0"


def test_almost_sure_growth():
    assert almost_sure_growth(EXAMPLE) == pytest.approx(-0.02, abs=1e-16)
    sig = np.array([0.2, 0.5])
    m = RegimeModel([[-1, 1], [1, -1]], sig ** 2 / 2, sig)
    assert almost_sure_growth(m) == 0
    g = RegimeModel([[-1, 1], [3, -3]], [0.1, 0.1], [0.3, 0.3])
    assert almost_sure_growth(g) == pytest.approx(0.1 - 0.045, abs=1e-16)


def test_classify_hand_cases():
    c = classify(EXAMPLE)
    assert (c.recurrence_class, c.as_limit) == (RecurrenceClass.TRANSIENT, AlmostSureLimit.TO_ZERO)
    assert c.scale == pytest.approx(0.14) and c.tolerance_used == pytest.approx(1.4e-13)
    z = classify(RegimeModel([[-1, 1], [1, -1]], [0.02, 0.125], [0.2, 0.5]))
    assert z.recurrence_class == RecurrenceClass.NULL_RECURRENT
    assert z.as_limit == AlmostSureLimit.NO_LIMIT_CLAIMED
    up = classify(TwoStateModel.from_deltas(1, 1, (0.12, -0.08), (0.2, 0.2)))
    assert up.mean_drift == pytest.approx(0.02, abs=1e-15)
    assert up.as_limit == AlmostSureLimit.TO_INFINITY


@given(st.floats(-1e-3, 1e-3))
def test_classify_agrees_with_sign(shift):
    m = TwoStateModel.from_deltas(1.0, 2.0, (shift, shift), (0.2, 0.3))
    c = classify(m)
    drift = almost_sure_growth(m)
    if drift > c.tolerance_used:
        assert c.as_limit == AlmostSureLimit.TO_INFINITY
    elif drift < -c.tolerance_used:
        assert c.as_limit == AlmostSureLimit.TO_ZERO
    else:
        assert c.recurrence_class == RecurrenceClass.NULL_RECURRENT
