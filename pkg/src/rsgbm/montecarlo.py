"""Exact-in-distribution simulation of the regime chain and the log price,
plus the estimators built on it.

Paths are simulated in fixed-size blocks.  Block k of an estimator draws
from Philox keyed on (master_seed, tag) and jumped k times, so the numbers
any path sees depend only on the seed, the estimator and the path's index,
never on how blocks are scheduled over threads.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from .ctmc import (SeriesConfig, as_regime, as_two_state, jump_cdf, occupation_times,
                   path_stream, sample_path, sojourn_cdf)
from .errors import DomainError
from .firstpassage import bridge_no_cross

BLOCK = 4096
SLEPIAN_BLOCK = 512
WILSON_THRESHOLD = 30

# one Philox key per estimator family
TAG_Y, TAG_XP, TAG_FPP, TAG_HIST, TAG_SLEPIAN = 11, 12, 13, 14, 15


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    master_seed: int = 20240601
    refinement: int = 1024
    confidence_level: float = 0.99
    workers: int | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 100:
            raise DomainError(f"n_paths must be an integer >= 100, got {self.n_paths!r}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise DomainError(f"master_seed must fit in 64 bits, got {self.master_seed!r}")
        r = self.refinement
        if int(r) != r or r < 1 or r & (r - 1):
            raise DomainError(f"refinement must be a power of two, got {r!r}")
        if not 0 < self.confidence_level < 1:
            raise DomainError(f"confidence_level must lie in (0, 1), got {self.confidence_level!r}")
        if self.workers is not None and self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers!r}")

    def resolved_workers(self):
        if self.workers is not None:
            return int(self.workers)
        env = os.environ.get("RSGBM_THREADS")
        if env:
            return max(1, int(env))
        return min(8, os.cpu_count() or 1)

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return MCConfig(**d)

    def to_dict(self):
        # worker count is left out on purpose: results do not depend on it
        return {"n_paths": self.n_paths, "master_seed": self.master_seed,
                "refinement": self.refinement, "confidence_level": self.confidence_level}


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    ci_low: float
    ci_high: float
    n_paths: int
    seed: int
    bias_estimate: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n_paths": self.n_paths, "seed": self.seed,
                "bias_estimate": self.bias_estimate, "config": self.config}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _z(level):
    return float(ndtri(0.5 + 0.5 * level))


def _estimate(samples, config, probability=False, bias=0.0, scale=1.0):
    """Mean, standard error and confidence interval of per-path samples."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    mean = float(np.mean(x))
    var = float(np.mean((x - mean) ** 2)) * n / (n - 1)
    se = math.sqrt(max(var, 0.0) / n)
    z = _z(config.confidence_level)
    lo, hi = mean - z * se, mean + z * se
    if probability:
        succ = n * mean
        if min(succ, n - succ) < WILSON_THRESHOLD:
            denom = 1 + z * z / n
            centre = (mean + z * z / (2 * n)) / denom
            half = z * math.sqrt(mean * (1 - mean) / n + z * z / (4 * n * n)) / denom
            lo, hi = centre - half, centre + half
        lo, hi = max(lo, 0.0), min(hi, 1.0)
    lo, hi = min(lo, mean), max(hi, mean)
    return MCEstimate(scale * mean, scale * se, scale * lo, scale * hi, n,
                      config.master_seed, bias, config.to_dict())


def _run_blocks(config, tag, block_size, work):
    """Apply work(rng, n) to every block and concatenate in block order."""
    n = config.n_paths
    sizes = [min(block_size, n - s) for s in range(0, n, block_size)]

    def one(k):
        return work(path_stream(config.master_seed, k, stream=tag), sizes[k])

    workers = min(config.resolved_workers(), len(sizes))
    if workers <= 1:
        parts = [one(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(col) for col in zip(*parts))
    return np.concatenate(parts)


def _initial_states(model, rng, n, initial_law):
    if initial_law is None:
        return np.full(n, model.initial_state, dtype=np.int64)
    law = np.asarray(initial_law, dtype=float)
    if law.shape != (model.n_states,) or np.any(law < 0) or abs(law.sum() - 1) > 1e-12:
        raise DomainError("initial_law must be a probability vector over the states")
    return np.minimum(np.searchsorted(np.cumsum(law), rng.random(n), side="right"),
                      model.n_states - 1)


def _chain_block(model, T, rng, n, initial_law=None, on_interval=None):
    """Simulate n chains on [0, T]; returns occupation times, shape (n, states).

    ``on_interval(state, start, dt, live)`` is called for every holding
    interval, truncated at T; dt is 0 where ``live`` is False.
    """
    n_states = model.n_states
    rates = model.rates
    cum = jump_cdf(model.Q) if n_states > 2 else None
    state = _initial_states(model, rng, n, initial_law)
    time = np.zeros(n)
    occ = np.zeros((n, n_states))
    live = np.ones(n, dtype=bool)
    rows = np.arange(n)
    while live.any():
        idx = np.flatnonzero(live)
        r = rates[state[idx]]
        hold = np.full(idx.size, np.inf)
        moving = r > 0
        hold[moving] = rng.standard_exponential(int(moving.sum())) / r[moving]
        end = time[idx] + hold
        stop = end >= T
        dt = np.zeros(n)
        dt[idx] = np.where(stop, T - time[idx], hold)
        occ[rows[idx], state[idx]] += dt[idx]
        if on_interval is not None:
            on_interval(state.copy(), time.copy(), dt, live.copy())
        go = idx[~stop]
        time[go] = end[~stop]
        if n_states == 2:
            state[go] = 1 - state[go]
        elif go.size:
            u = rng.random(go.size)
            state[go] = (cum[state[go]] <= u[:, None]).sum(axis=1)
        live[idx[stop]] = False
    return occ


# ------------------------------------------------------------ log price

def simulate_Yt(model, t, stream):
    """One exact draw of Y_t = ln(X_t / x0) from a single generator."""
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    model = as_regime(model)
    occ = occupation_times(sample_path(model, t, stream), t).durations
    mean = math.fsum(model.delta * occ)
    var = math.fsum(model.sigma ** 2 * occ)
    return mean + math.sqrt(var) * stream.standard_normal()


def sample_Yt(model, t, config, initial_law=None):
    """n_paths exact draws of Y_t, in path order."""
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    model = as_regime(model)

    def work(rng, n):
        occ = _chain_block(model, t, rng, n, initial_law)
        return occ @ model.delta + np.sqrt(occ @ model.sigma ** 2) * rng.standard_normal(n)

    return _run_blocks(config, TAG_Y, BLOCK, work)


def estimate_lnX_moments(model, t, config):
    """(E[Y_t], E[Y_t^2]) estimates from the same exact samples."""
    y = sample_Yt(model, t, config)
    return _estimate(y, config), _estimate(y * y, config)


def _xp_log_weights(model, p, t, config, initial_law, naive):
    lam = model.lambda_p(p)
    base = p * math.log(model.x0)

    def work(rng, n):
        occ = _chain_block(model, t, rng, n, initial_law)
        rb = base + occ @ lam
        y = occ @ model.delta + np.sqrt(occ @ model.sigma ** 2) * rng.standard_normal(n)
        return rb, base + p * y

    rb, nv = _run_blocks(config, TAG_XP, BLOCK, work)
    return nv if naive else rb


def estimate_moment_Xp(model, p, t, config, rao_blackwell=True, initial_law=None):
    """E[X_t^p] by averaging x0^p exp(sum_i lambda_i(p) occ_i(t)) over chain paths.

    With ``rao_blackwell=False`` the naive estimator exp(p ln X_t) is used on
    the same chain draws.  Accumulation is shifted by the largest log
    weight; the shift is returned to the value only at the end.
    """
    if not (p >= 0 and math.isfinite(p)):
        raise DomainError(f"p must be finite and >= 0, got {p!r}")
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    model = as_regime(model)
    logw = _xp_log_weights(model, p, t, config, initial_law, not rao_blackwell)
    shift = float(np.max(logw))
    est = _estimate(np.exp(logw - shift), config)
    scale = math.exp(shift)
    return MCEstimate(est.value * scale, est.std_error * scale, est.ci_low * scale,
                      est.ci_high * scale, est.n_paths, est.seed, 0.0, est.config)


def log_moment_rate(estimate, t):
    """(1/t) ln of a positive moment estimate and its delta-method SE."""
    return math.log(estimate.value) / t, estimate.std_error / (estimate.value * t)


# ------------------------------------------------------- first passage

def _first_passage_weights(query, config, sigma=None):
    model = query.model.regime
    T = query.T
    a_t = query.a_tilde
    delta = model.delta
    sig = np.asarray(model.sigma if sigma is None else sigma, dtype=float)

    def work(rng, n):
        y = np.full(n, a_t)
        w = np.ones(n)

        def step(state, start, dt, live):
            idx = np.flatnonzero(live)
            s = state[idx]
            h = dt[idx]
            y1 = y[idx] + delta[s] * h + sig[s] * np.sqrt(h) * rng.standard_normal(idx.size)
            w[idx] *= bridge_no_cross(y[idx], y1, sig[s], h)
            y[idx] = y1

        _chain_block(model, T, rng, n, on_interval=step)
        return w

    return _run_blocks(config, TAG_FPP, BLOCK, work)


def estimate_first_passage(query, config, sigma=None):
    """P(tau_a > T) by conditional MC: the product over holding intervals of
    the exact bridge survival probabilities given the interval endpoints.

    ``sigma`` overrides the per-regime volatilities (zero entries allowed),
    which is how the surrogate process in the Slepian comparison is
    checked against an exact computation.
    """
    return _estimate(_first_passage_weights(query, config, sigma), config, probability=True)


# --------------------------------------------------- occupation histogram

@dataclass(frozen=True)
class OccupationHistogram:
    t: float
    edges: np.ndarray
    empirical_cdf: np.ndarray
    analytic_cdf: np.ndarray
    sup_distance: float
    ks_band: float
    atom_frequency: float
    atom_std_error: float
    atom_expected: float
    n_paths: int

    @property
    def ks_pass(self):
        return self.sup_distance <= self.ks_band

    @property
    def atom_z(self):
        return (self.atom_frequency - self.atom_expected) / self.atom_std_error


KS_99 = 1.6276


def estimate_occupation_histogram(model, t, bins, config, series=SeriesConfig()):
    """Binned empirical CDF of alpha(t) against the analytic law; the atom
    at alpha(t) = t is counted separately.
    """
    m = as_two_state(model)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    if bins < 10:
        raise DomainError(f"need at least 10 bins, got {bins}")
    regime = m.regime

    def work(rng, n):
        return _chain_block(regime, t, rng, n)[:, 0]

    alpha = _run_blocks(config, TAG_HIST, BLOCK, work)
    n = alpha.size
    edges = np.linspace(0.0, t, bins + 1)[1:-1]
    atom = alpha >= t
    emp = np.searchsorted(np.sort(alpha[~atom]), edges, side="right") / n
    ana = np.array([sojourn_cdf(m, t, s, series) for s in edges])
    freq = float(atom.mean())
    expected = math.exp(-m.lambda0 * t)
    return OccupationHistogram(float(t), edges, emp, ana, float(np.max(np.abs(emp - ana))),
                               KS_99 / math.sqrt(n), freq,
                               math.sqrt(expected * (1 - expected) / n), expected, n)


# -------------------------------------------------------- Slepian surrogate

def _slepian_weights(query, config, zero_eta=False):
    """Per-path survival weights of the surrogate on the fine grid and on
    the coarse grid made of every other fine point."""
    m = query.model
    model = m.regime
    s0, s1 = m.sigma
    c = math.sqrt(max(s0 * s0 - s1 * s1, 0.0))
    T = query.T
    M = config.refinement
    if M < 2:
        raise DomainError("the Slepian estimator needs refinement >= 2")
    grid = np.linspace(0.0, T, M + 1)

    def work(rng, n):
        starts, lens, in0 = [], [], []

        def step(state, start, dt, live):
            starts.append(start)
            lens.append(dt)
            in0.append(state == 0)

        _chain_block(model, T, rng, n, on_interval=step)
        # alpha is piecewise linear between the ends of the holding intervals
        ends = np.stack([np.where(d > 0, s + d, T) for s, d in zip(starts, lens)], axis=1)
        knots = np.concatenate([np.zeros((n, 1)), np.minimum(ends, T)], axis=1)
        gain = np.stack([np.where(z, d, 0.0) for z, d in zip(in0, lens)], axis=1)
        acc = np.concatenate([np.zeros((n, 1)), np.cumsum(gain, axis=1)], axis=1)
        alpha = np.empty((n, M + 1))
        for i in range(n):
            alpha[i] = np.interp(grid, knots[i], acc[i])
        d_alpha = np.maximum(np.diff(alpha, axis=1), 0.0)
        z = np.empty((n, M + 1))
        z[:, 0] = 0.0
        np.multiply(np.sqrt(d_alpha), rng.standard_normal((n, M)), out=z[:, 1:])
        np.cumsum(z, axis=1, out=z)
        z *= c
        eta = np.zeros(n) if zero_eta else rng.standard_normal(n)
        z += s1 * np.sqrt(grid)[None, :] * eta[:, None]
        z += (m.delta0 - m.delta1) * alpha
        z += query.a_tilde + m.delta1 * grid[None, :]
        k = -2.0 / (c * c) if c > 0 else -np.inf

        def survive(zz, da):
            # per-cell bridge factor with variance c^2 * da; a zero variance
            # cell is a straight segment
            z0, z1 = zz[:, :-1], zz[:, 1:]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                e = z0 * z1
                e /= da
                e *= k
                f = -np.expm1(e)
            f[(z0 <= 0) | (z1 <= 0)] = 0.0
            return np.prod(f, axis=1)

        fine = survive(z, d_alpha)
        coarse = survive(z[:, ::2], alpha[:, 2::2] - alpha[:, :-2:2])
        return fine, coarse

    return _run_blocks(config, TAG_SLEPIAN, SLEPIAN_BLOCK, work)


def slepian_functional(query, config, zero_eta=False):
    """Survival probability of sqrt(s0^2 - s1^2) B_alpha + s1 sqrt(t) eta0 + g.

    Accepts s0 >= s1 (s0 == s1 drops the time-changed term).  The
    discretisation bias of the fine grid is estimated by the difference
    between coarse and fine estimates on the same draws.
    """
    s0, s1 = query.model.sigma
    if not s0 >= s1 >= 0:
        raise DomainError(f"needs sigma0 >= sigma1 >= 0, got {s0}, {s1}")
    fine, coarse = _slepian_weights(query, config, zero_eta)
    est = _estimate(fine, config, probability=True)
    bias = float(np.mean(coarse) - np.mean(fine))
    return MCEstimate(est.value, est.std_error, est.ci_low, est.ci_high, est.n_paths,
                      est.seed, bias, est.config)
