"""Modulating Markov chain: model types, generator algebra, path sampling
and the two-state occupation-time law.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import (DomainError, IrreducibilityError, ModelError,
                     SolvabilityError, TruncationError)

ROW_SUM_RTOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def is_irreducible(Q):
    """True when every state reaches every other on the support graph of Q."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    adj = (Q > 0) & ~np.eye(n, dtype=bool)

    def reach(graph):
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(graph[i]):
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        return len(seen) == n

    return reach(adj) and reach(adj.T)


def model_issues(Q, mu, sigma, x0=1.0, initial_state=0):
    """List every problem with the raw model fields as ``(field, message)``.

    Reducibility is reported only when the generator is otherwise valid;
    it is tagged with field ``"Q:irreducible"``.
    """
    issues = []
    try:
        Q = np.asarray(Q, dtype=float)
    except (TypeError, ValueError):
        return [("Q", "must be a square numeric matrix")]
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
        return [("Q", f"must be a nonempty square matrix, got shape {Q.shape}")]
    n = Q.shape[0]
    q_ok = True
    if not np.all(np.isfinite(Q)):
        issues.append(("Q", "entries must be finite"))
        q_ok = False
    else:
        for i in range(n):
            off = np.delete(Q[i], i)
            if np.any(off < 0):
                j = [k for k in range(n) if k != i and Q[i, k] < 0][0]
                issues.append((f"Q[{i}][{j}]", f"off-diagonal rate {float(Q[i, j])!r} is negative"))
                q_ok = False
            resid = float(Q[i].sum())
            scale = max(1.0, float(np.abs(Q[i]).sum()))
            if abs(resid) > ROW_SUM_RTOL * scale:
                issues.append((f"Q[{i}]", f"row sums to {resid!r}, expected 0"))
                q_ok = False
    for name, vec in (("mu", mu), ("sigma", sigma)):
        try:
            arr = np.asarray(vec, dtype=float)
        except (TypeError, ValueError):
            issues.append((name, "must be a numeric vector"))
            continue
        if arr.shape != (n,):
            issues.append((name, f"must have length {n}, got shape {arr.shape}"))
        elif not np.all(np.isfinite(arr)):
            issues.append((name, "entries must be finite"))
        elif name == "sigma":
            for i in np.flatnonzero(arr <= 0):
                issues.append((f"sigma[{i}]", f"volatility must be > 0, got {float(arr[i])!r}"))
    if not (isinstance(x0, (int, float)) and math.isfinite(x0) and x0 > 0):
        issues.append(("x0", f"initial price must be > 0, got {x0!r}"))
    if not (isinstance(initial_state, (int, np.integer)) and 0 <= initial_state < n):
        issues.append(("initial_state", f"must be a state index in [0, {n}), got {initial_state!r}"))
    if q_ok and not is_irreducible(Q):
        issues.append(("Q:irreducible", "generator is reducible"))
    return issues


@dataclass(frozen=True, eq=False)
class RegimeModel:
    """Generator Q, per-regime drift and volatility, initial price and regime."""

    Q: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    x0: float = 1.0
    initial_state: int = 0

    def __post_init__(self):
        issues = model_issues(self.Q, self.mu, self.sigma, self.x0, self.initial_state)
        if issues:
            msg = "; ".join(f"{f}: {m}" for f, m in issues)
            if all(f == "Q:irreducible" for f, _ in issues):
                raise IrreducibilityError(msg)
            raise ModelError(msg)
        object.__setattr__(self, "Q", _frozen(self.Q))
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "sigma", _frozen(self.sigma))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def n_states(self):
        return self.Q.shape[0]

    @property
    def rates(self):
        """Total leaving rate of each state."""
        return -np.diag(self.Q)

    @property
    def delta(self):
        return self.mu - 0.5 * self.sigma ** 2

    def lambda_p(self, p):
        return p * self.mu + 0.5 * p * (p - 1.0) * self.sigma ** 2

    def with_initial_state(self, state):
        return RegimeModel(self.Q, self.mu, self.sigma, self.x0, state)

    def to_dict(self):
        return {"Q": self.Q.tolist(), "mu": self.mu.tolist(),
                "sigma": self.sigma.tolist(), "x0": self.x0,
                "initial_state": self.initial_state}


@dataclass(frozen=True, eq=False)
class DerivedRates:
    """Log-drifts delta_i and the p-th moment rates lambda_i(p)."""

    mu: np.ndarray
    sigma: np.ndarray

    @property
    def delta(self):
        return self.mu - 0.5 * self.sigma ** 2

    def lambda_p(self, p):
        return p * self.mu + 0.5 * p * (p - 1.0) * self.sigma ** 2


def derived_rates(model):
    model = as_regime(model)
    return DerivedRates(model.mu, model.sigma)


@dataclass(frozen=True)
class TwoStateModel:
    """Two-regime chain with rates lambda0 (0 -> 1) and lambda1 (1 -> 0),
    always started in regime 0.
    """

    lambda0: float
    lambda1: float
    mu: tuple = (0.0, 0.0)
    sigma: tuple = (1.0, 1.0)
    x0: float = 1.0
    regime: RegimeModel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.lambda1 > 0):
            raise ModelError(f"switching rates must be > 0, got ({self.lambda0}, {self.lambda1})")
        mu = tuple(float(m) for m in self.mu)
        sigma = tuple(float(s) for s in self.sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        Q = [[-self.lambda0, self.lambda0], [self.lambda1, -self.lambda1]]
        object.__setattr__(self, "regime", RegimeModel(Q, mu, sigma, self.x0, 0))

    @classmethod
    def from_deltas(cls, lambda0, lambda1, delta, sigma, x0=1.0):
        """Build from log-drifts delta_i = mu_i - sigma_i^2 / 2."""
        mu = tuple(d + 0.5 * s * s for d, s in zip(delta, sigma))
        return cls(lambda0, lambda1, mu, tuple(sigma), x0)

    @classmethod
    def from_regime(cls, model):
        if model.n_states != 2:
            raise DomainError(f"expected a two-state model, got {model.n_states} states")
        if model.initial_state != 0:
            raise DomainError("two-state formulas assume the chain starts in regime 0; "
                              "relabel the states explicitly")
        return cls(float(model.Q[0, 1]), float(model.Q[1, 0]),
                   tuple(model.mu), tuple(model.sigma), model.x0)

    @property
    def delta0(self):
        return self.mu[0] - 0.5 * self.sigma[0] ** 2

    @property
    def delta1(self):
        return self.mu[1] - 0.5 * self.sigma[1] ** 2

    @property
    def sigma0(self):
        return self.sigma[0]

    @property
    def sigma1(self):
        return self.sigma[1]


def as_regime(model):
    if isinstance(model, TwoStateModel):
        return model.regime
    if isinstance(model, RegimeModel):
        return model
    raise TypeError(f"expected RegimeModel or TwoStateModel, got {type(model).__name__}")


def as_two_state(model):
    if isinstance(model, TwoStateModel):
        return model
    return TwoStateModel.from_regime(as_regime(model))


def _generator(Q):
    if isinstance(Q, (RegimeModel, TwoStateModel)):
        return as_regime(Q).Q
    Q = np.asarray(Q, dtype=float)
    issues = [i for i in model_issues(Q, np.zeros(len(Q)), np.ones(len(Q)))]
    if issues:
        msg = "; ".join(f"{f}: {m}" for f, m in issues)
        if all(f == "Q:irreducible" for f, _ in issues):
            raise IrreducibilityError(msg)
        raise ModelError(msg)
    return Q


def stationary_distribution(Q):
    """Invariant law of an irreducible generator (GTH elimination).

    GTH never subtracts, so every entry of the result is computed to
    nearly full relative precision and is strictly positive.
    """
    Q = _generator(Q)
    n = Q.shape[0]
    if n == 1:
        return np.ones(1)
    a = Q.copy()
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for j in range(1, n):
        pi[j] = pi[:j] @ a[:j, j]
    return pi / math.fsum(pi)


def fredholm_solve(Q, pi, v):
    """Solve Qu = v in the gauge sum_i pi_i u_i = 0.

    Uses the nonsingular matrix Q - 1 pi^T, whose solutions automatically
    satisfy both the equation and the gauge when pi . v = 0.
    """
    Q = _generator(Q)
    pi = np.asarray(pi, dtype=float)
    v = np.asarray(v, dtype=float)
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    mean = float(pi @ v)
    if abs(mean) > 1e-10 * vmax:
        raise SolvabilityError(f"sum_i pi_i v_i = {mean!r} is not zero")
    if vmax == 0.0:
        return np.zeros_like(v)
    n = Q.shape[0]
    u = np.linalg.solve(Q - np.outer(np.ones(n), pi), v)
    form = float(np.sum(pi * v * u))
    if form > 1e-12 * vmax * float(np.max(np.abs(u))):
        from .errors import NumericalError
        raise NumericalError(f"sum_i pi_i v_i u_i = {form!r} should be negative")
    return u


# ---------------------------------------------------------------- paths

@dataclass(frozen=True, eq=False)
class OccupationTimes:
    """Time spent in each state up to ``t``."""

    t: float
    durations: np.ndarray
    initial_state: int = 0

    @property
    def alpha(self):
        """Time spent in the initial state."""
        return float(self.durations[self.initial_state])

    @property
    def beta(self):
        """Time spent away from the initial state (two-state: the other one)."""
        return self.t - self.alpha


@dataclass(frozen=True, eq=False)
class RegimePath:
    initial_state: int
    horizon: float
    jump_times: np.ndarray
    states: np.ndarray
    n_states: int = 2

    @property
    def n_jumps(self):
        return int(self.jump_times.size)

    def state_at(self, t):
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.initial_state if k == 0 else int(self.states[k - 1])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["jump_time", "new_state"])
        for s, j in zip(self.jump_times, self.states):
            w.writerow([format(float(s), ".17g"), int(j)])
        return buf.getvalue()


def path_stream(master_seed, index, stream=1):
    """Counter-based generator for path ``index``: Philox keyed on
    (master_seed, stream) and advanced by ``index`` jumps of 2**128 draws.
    """
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key).jumped(index))


def jump_cdf(Q):
    """Row-wise cumulative jump-chain probabilities q_ij / q_i (diagonal zeroed)."""
    Q = np.asarray(Q, dtype=float)
    P = np.where(np.eye(Q.shape[0], dtype=bool), 0.0, Q)
    cum = np.cumsum(P, axis=1)
    tot = cum[:, -1:]
    return np.divide(cum, tot, out=np.ones_like(cum), where=tot > 0)


def sample_path(model, T, stream):
    """Exact path of the chain on [0, T] from its jump-hold description."""
    if not T > 0:
        raise DomainError(f"horizon must be > 0, got {T!r}")
    model = as_regime(model)
    n = model.n_states
    rates = model.rates
    cum = jump_cdf(model.Q) if n > 2 else None
    state = model.initial_state
    time = 0.0
    times, states = [], []
    while rates[state] > 0:
        time += stream.exponential() / rates[state]
        if time > T:
            break
        if n == 2:
            state = 1 - state
        else:
            state = int(np.searchsorted(cum[state], stream.random(), side="right"))
        times.append(time)
        states.append(state)
    return RegimePath(model.initial_state, float(T), np.array(times, dtype=float),
                      np.array(states, dtype=np.int64), n)


def occupation_times(path, t):
    if not 0 <= t <= path.horizon:
        raise DomainError(f"t={t!r} outside [0, {path.horizon!r}]")
    parts = [[] for _ in range(path.n_states)]
    prev, state = 0.0, path.initial_state
    for jt, nxt in zip(path.jump_times, path.states):
        if jt >= t:
            break
        parts[state].append(jt - prev)
        prev, state = float(jt), int(nxt)
    parts[state].append(t - prev)
    durations = np.array([math.fsum(p) for p in parts])
    return OccupationTimes(float(t), durations, path.initial_state)


# ---------------------------------------------------- sojourn-time law

@dataclass(frozen=True)
class SeriesConfig:
    eps: float = 1e-12
    max_terms: int = 500


def _sojourn_series(l0, l1, t, s, first_scale=1.0, eps=1e-12, max_terms=500, chunk=32):
    """Continuous part of the law of alpha(t) at the points ``s``.

    Term k of each series is computed in log space.  Both series have
    term ratios bounded by z / k^2 with z = l0 l1 s (t - s), so once that
    ratio r drops below one the remaining tail is at most c_K r / (1 - r).

    Returns ``(values, tail_bounds, terms_used)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    sts = s * (t - s)
    z = l0 * l1 * sts
    log_e = -l0 * s - l1 * (t - s)
    total = np.zeros_like(s)
    tail = np.full_like(s, np.inf)
    done = np.zeros(s.shape, dtype=bool)
    log_scale = math.log(first_scale)
    k0 = 1
    while k0 <= max_terms:
        k = np.arange(k0, min(k0 + chunk, max_terms + 1), dtype=float)[:, None]
        la = (log_scale + k * math.log(l0) + (k - 1) * math.log(l1)
              + xlogy(k - 1, sts) - 2 * gammaln(k) + log_e)
        lb = (k * math.log(l0 * l1) + xlogy(k, s) + xlogy(k - 1, t - s)
              - gammaln(k) - gammaln(k + 1) + log_e)
        terms = np.exp(la) + np.exp(lb)
        live = ~done
        partial = total[None, :] + np.cumsum(terms, axis=0)
        r = z[None, :] / k ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = np.where(r < 1, terms * r / (1 - r), np.inf)
        ok = (bound <= eps * partial) | (bound == 0)
        hit = ok.any(axis=0) & live
        first = np.argmax(ok, axis=0)
        cols = np.arange(s.size)
        total = np.where(hit, partial[first, cols], np.where(live, partial[-1], total))
        tail = np.where(hit, bound[first, cols], tail)
        done |= hit
        if done.all():
            return total, tail, int(k[-1, 0])
        k0 += chunk
    worst = float(np.max(np.where(done, 0.0, total)))
    raise TruncationError(f"sojourn series did not converge within {max_terms} terms",
                          tail_bound=worst, terms=max_terms)


def sojourn_density(model, t, s, series=SeriesConfig()):
    """Law of the time alpha(t) spent in regime 0 by the chain started there.

    Returns ``(density, atom)``: the continuous density at ``s`` and the
    probability mass exp(-lambda0 t) sitting at s = t.
    """
    model = as_two_state(model)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr > t):
        raise DomainError(f"s must lie in [0, {t}]")
    vals, _, _ = _sojourn_series(model.lambda0, model.lambda1, t, s_arr.ravel(),
                                 eps=series.eps, max_terms=series.max_terms)
    atom = math.exp(-model.lambda0 * t)
    if s_arr.ndim == 0:
        return float(vals[0]), atom
    return vals.reshape(s_arr.shape), atom


def sojourn_cdf(model, t, s, series=SeriesConfig(), rtol=1e-12):
    """P(alpha(t) <= s) for s < t (the atom at t is excluded)."""
    from .quadrature import adaptive_gauss_legendre
    model = as_two_state(model)
    f = lambda x: sojourn_density(model, t, x, series)[0]  # noqa: E731
    return adaptive_gauss_legendre(f, 0.0, s, rtol=rtol, atol=1e-16).value


# --------------------------------------------------------------- JSON

def model_from_dict(doc):
    issues = []
    for key in ("Q", "mu", "sigma"):
        if key not in doc:
            issues.append((key, "missing"))
    if issues:
        raise ModelError("; ".join(f"{f}: {m}" for f, m in issues))
    return RegimeModel(doc["Q"], doc["mu"], doc["sigma"],
                       doc.get("x0", 1.0), doc.get("initial_state", 0))


def load_model(text):
    return model_from_dict(json.loads(text))
