import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import iv

from rsgbm.ctmc import (RegimeModel, RegimePath, SeriesConfig, TwoStateModel, fredholm_solve,
                        is_irreducible, load_model, occupation_times, path_stream, sample_path,
                        sojourn_cdf, sojourn_density, stationary_distribution)
from rsgbm.errors import (DomainError, IrreducibilityError, ModelError, SolvabilityError,
                          TruncationError)

from conftest import random_generator

Q2 = [[-1.0, 1.0], [2.0, -2.0]]


def test_stationary_two_state():
    assert np.allclose(stationary_distribution(Q2), [2 / 3, 1 / 3], atol=1e-15)
    assert np.allclose(stationary_distribution([[-3, 3], [3, -3]]), [0.5, 0.5], atol=1e-15)


def test_stationary_matches_matrix_exponential(rng):
    for _ in range(10):
        Q = random_generator(rng, 4, sparsity=0.5)
        pi = stationary_distribution(Q)
        t = 1e3 / np.min(np.abs(np.diag(Q)))
        P = expm(t * Q)
        assert np.max(np.abs(P - pi[None, :])) <= 1e-8
        assert np.max(np.abs(pi @ Q)) <= 1e-12 * np.max(np.abs(Q).sum(axis=1))


def test_reducible_rejected():
    Q = [[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]
    assert not is_irreducible(np.array(Q))
    with pytest.raises(IrreducibilityError):
        stationary_distribution(Q)
    with pytest.raises(IrreducibilityError):
        RegimeModel(Q, [0, 0, 0], [1, 1, 1])


def test_invalid_models():
    with pytest.raises(ModelError, match="row sums"):
        RegimeModel([[-1.0, 2.0], [1.0, -1.0]], [0, 0], [1, 1])
    with pytest.raises(ModelError, match="sigma"):
        RegimeModel(Q2, [0, 0], [1, 0])
    with pytest.raises(ModelError, match="x0"):
        RegimeModel(Q2, [0, 0], [1, 1], x0=-1)


def test_fredholm_examples():
    pi = stationary_distribution(Q2)
    u = fredholm_solve(Q2, pi, [1.0, -2.0])
    assert np.allclose(u, [-1 / 3, 2 / 3], atol=1e-14)
    assert np.all(fredholm_solve(Q2, pi, [0.0, 0.0]) == 0)
    with pytest.raises(SolvabilityError):
        fredholm_solve(Q2, pi, [1.0, 1.0])


def test_fredholm_round_trip(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        Q = random_generator(rng, n, sparsity=0.3)
        pi = stationary_distribution(Q)
        v = rng.normal(size=n)
        v -= pi @ v
        u = fredholm_solve(Q, pi, v)
        assert np.max(np.abs(Q @ u - v)) <= 1e-10 * np.max(np.abs(v))
        assert abs(pi @ u) <= 1e-12 * max(1.0, np.max(np.abs(u)))


def test_sample_path_deterministic():
    m = TwoStateModel(1.0, 2.0).regime
    a = sample_path(m, 5.0, path_stream(7, 3))
    b = sample_path(m, 5.0, path_stream(7, 3))
    assert np.array_equal(a.jump_times, b.jump_times)
    assert np.array_equal(a.states, b.states)
    c = sample_path(m, 5.0, path_stream(7, 4))
    assert not np.array_equal(a.jump_times, c.jump_times)


def test_sample_path_mean_jumps():
    # symmetric chain: N(t) is Poisson(lambda t)
    m = TwoStateModel(1.0, 1.0).regime
    n = np.array([sample_path(m, 5.0, path_stream(11, i)).n_jumps for i in range(20_000)])
    se = n.std(ddof=1) / math.sqrt(n.size)
    assert abs(n.mean() - 5.0) <= 3 * se


def test_sample_path_general_chain_frequencies(rng):
    Q = random_generator(rng, 3)
    m = RegimeModel(Q, [0, 0, 0], [1, 1, 1])
    counts = np.zeros((3, 3))
    for i in range(3000):
        p = sample_path(m, 3.0, path_stream(5, i))
        prev = p.initial_state
        for s in p.states:
            counts[prev, s] += 1
            prev = s
    P = np.where(np.eye(3, dtype=bool), 0, Q) / -np.diag(Q)[:, None]
    assert np.all(np.diag(counts) == 0)
    emp = counts / counts.sum(axis=1, keepdims=True)
    assert np.max(np.abs(emp - P)) < 0.05


def test_short_horizon_has_no_jumps():
    m = TwoStateModel(1.0, 1.0).regime
    jumps = [sample_path(m, 1e-6, path_stream(1, i)).n_jumps for i in range(1000)]
    assert sum(jumps) <= 1


def test_occupation_times_hand_paths():
    p = RegimePath(0, 2.0, np.array([]), np.array([], dtype=int))
    o = occupation_times(p, 1.5)
    assert o.alpha == 1.5 and o.beta == 0.0
    p = RegimePath(0, 2.0, np.array([0.4]), np.array([1]))
    o = occupation_times(p, 1.5)
    assert o.alpha == 0.4 and o.beta == pytest.approx(1.1, abs=1e-15)
    with pytest.raises(DomainError):
        occupation_times(p, 2.5)


@given(st.integers(0, 10_000), st.floats(0.01, 5.0))
def test_occupation_times_sum(seed, t):
    m = TwoStateModel(1.3, 0.7).regime
    path = sample_path(m, 5.0, path_stream(seed, 0))
    o = occupation_times(path, t)
    assert abs(o.durations.sum() - t) <= 1e-14 * t
    assert np.all(o.durations >= 0) and np.all(o.durations <= t)


def test_mean_alpha_mc():
    m = TwoStateModel(1.0, 1.0).regime
    a = np.array([occupation_times(sample_path(m, 1.0, path_stream(3, i)), 1.0).alpha
                  for i in range(20_000)])
    se = a.std(ddof=1) / math.sqrt(a.size)
    assert abs(a.mean() - 0.716166) <= 3 * se


def bessel_density(l0, l1, t, s):
    z = l0 * l1 * s * (t - s)
    r = 2 * math.sqrt(z)
    return math.exp(-l0 * s - l1 * (t - s)) * (
        l0 * iv(0, r) + math.sqrt(l0 * l1 * s / (t - s)) * iv(1, r))


@pytest.mark.parametrize("l0,l1,t", [(1, 1, 1), (0.1, 10, 1), (10, 0.1, 10), (3, 2, 5)])
def test_sojourn_density_matches_bessel(l0, l1, t):
    m = TwoStateModel(l0, l1)
    for s in np.linspace(0.01, 0.99, 9) * t:
        d, atom = sojourn_density(m, t, s)
        assert d == pytest.approx(bessel_density(l0, l1, t, s), rel=1e-10)
        assert atom == math.exp(-l0 * t)


@pytest.mark.parametrize("l0", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("l1", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_sojourn_total_mass(l0, l1, t):
    m = TwoStateModel(l0, l1)
    mass = sojourn_cdf(m, t, t)
    assert abs(mass + math.exp(-l0 * t) - 1) <= 1e-8
    # independent route: scipy quad on the Bessel form
    ref = quad(lambda s: bessel_density(l0, l1, t, s), 0, t, epsabs=1e-13, epsrel=1e-12,
               limit=200)[0]
    assert mass == pytest.approx(ref, abs=1e-8)


def test_sojourn_truncation_error():
    m = TwoStateModel(50.0, 50.0)
    with pytest.raises(TruncationError) as exc:
        sojourn_density(m, 10.0, 5.0, SeriesConfig(eps=1e-12, max_terms=20))
    assert exc.value.terms == 20


def test_load_model_and_csv():
    m = load_model('{"Q": [[-1, 1], [2, -2]], "mu": [0.1, 0.2], "sigma": [0.3, 0.4]}')
    assert m.n_states == 2 and m.x0 == 1.0 and m.initial_state == 0
    assert np.allclose(m.delta, [0.1 - 0.045, 0.2 - 0.08])
    assert np.allclose(m.lambda_p(0), 0) and np.allclose(m.lambda_p(1), m.mu)
    p = RegimePath(0, 1.0, np.array([0.25]), np.array([1]))
    assert p.to_csv() == "jump_time,new_state\n0.25,1\n"
