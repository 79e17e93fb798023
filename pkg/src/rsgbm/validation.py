"""The acceptance suite: analytic results checked against independent
oracles and the Monte Carlo engine.

``run_validation`` returns a report (plain dict, deterministic for a given
seed) and the wall-clock timings, which are kept out of the report so two
runs can be compared byte for byte.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .ctmc import RegimeModel, TwoStateModel, stationary_distribution, _sojourn_series
from .firstpassage import (DEFAULT_VARIANT, VARIANTS, FirstPassageQuery, bm_no_cross, bounds,
                           slepian_upper)
from .moments import asymptotic_rates, closed_form_lambda_equal, lnx_moments
from .montecarlo import (MCConfig, estimate_first_passage, estimate_lnX_moments,
                         estimate_moment_Xp, estimate_occupation_histogram, log_moment_rate,
                         slepian_functional)
from .quadrature import adaptive_gauss_legendre
from .spectral import AlmostSureLimit, RecurrenceClass, almost_sure_growth, classify, eta_p

DEFAULT_SEED = 20240601


@dataclass(frozen=True)
class ValidationConfig:
    master_seed: int = DEFAULT_SEED
    workers: int | None = None
    # multiplies every Monte Carlo path count; 1 is the specified scale
    path_scale: float = 1.0

    def mc(self, n_paths, offset, **kw):
        n = max(100, int(round(n_paths * self.path_scale)))
        return MCConfig(n_paths=n, master_seed=self.master_seed + offset,
                        workers=self.workers, **kw)


def _check(name, value, reference, tol, passed=None):
    """One comparison.  kind "abs" means passed == |value - reference| <= tol;
    "custom" checks (orderings, one-sided bounds) carry their own verdict."""
    kind = "abs" if passed is None else "custom"
    if passed is None:
        passed = abs(value - reference) <= tol
    return {"name": name, "kind": kind, "value": value, "reference": reference,
            "tolerance": tol, "passed": bool(passed)}


def _random_generator(rng, n):
    Q = rng.uniform(0.1, 3.0, size=(n, n))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def _random_model(rng, n=None):
    n = int(rng.integers(1, 9)) if n is None else n
    return RegimeModel(_random_generator(rng, n), rng.uniform(-1, 1, n), rng.uniform(0.05, 1.0, n))


# -------------------------------------------------------------- criteria

def criterion_1(cfg):
    rng = np.random.default_rng(cfg.master_seed + 1)
    worst0 = 0.0
    for _ in range(100):
        worst0 = max(worst0, abs(eta_p(_random_model(rng), 0.0)))
    worst1 = 0.0
    for _ in range(100):
        mu, sigma = rng.uniform(-1, 1), rng.uniform(0.05, 1.0)
        m = RegimeModel([[0.0]], [mu], [sigma])
        for p in (0.5, 1.0, 2.0, 5.0):
            worst1 = max(worst1, abs(eta_p(m, p) + (p * mu + 0.5 * p * (p - 1) * sigma ** 2)))
    return [_check("max |eta_0| over 100 random models", worst0, 0.0, 1e-10),
            _check("max single-regime eta_p error", worst1, 0.0, 1e-12)]


def criterion_2(cfg):
    m = TwoStateModel(1.0, 1.0, (0.1, -0.1), (0.2, 0.2))
    t = 20.0
    # chain started from its stationary law; see the README for why
    pi = stationary_distribution(m.regime.Q)
    checks = [_check("-eta_1 vs sqrt(1.01) - 1", -eta_p(m, 1.0), math.sqrt(1.01) - 1, 1e-12)]
    for p in (1.0, 2.0):
        est = estimate_moment_Xp(m, p, t, cfg.mc(100_000, 2), initial_law=pi)
        rate, se = log_moment_rate(est, t)
        ref = -eta_p(m, p)
        checks.append(_check(f"(1/t) ln E[X_t^{p:g}] at t=20", rate, ref,
                             max(3 * se, 0.02 * abs(ref))))
    return checks


def criterion_3(cfg):
    rng = np.random.default_rng(cfg.master_seed + 3)
    mismatches = 0
    for _ in range(1000):
        m = _random_model(rng)
        # independent stationary law: least squares on [Q^T; 1] pi = e
        n = m.n_states
        A = np.vstack([m.Q.T, np.ones(n)])
        pi = np.linalg.lstsq(A, np.r_[np.zeros(n), 1.0], rcond=None)[0]
        drift = float(pi @ m.delta)
        c = classify(m)
        expected = (AlmostSureLimit.TO_INFINITY if drift > 0 else AlmostSureLimit.TO_ZERO)
        if c.as_limit != expected or c.recurrence_class != RecurrenceClass.TRANSIENT:
            mismatches += 1
    checks = [_check("branch mismatches on 1000 random models", mismatches, 0, 0)]
    Q = [[-1.0, 1.0], [1.0, -1.0]]
    hand = [
        ("drift -0.02", RegimeModel(Q, [0.1, -0.1], [0.2, 0.2]), -0.02,
         RecurrenceClass.TRANSIENT, AlmostSureLimit.TO_ZERO),
        ("zero drift", RegimeModel(Q, [0.02, 0.045], [0.2, 0.3]), 0.0,
         RecurrenceClass.NULL_RECURRENT, AlmostSureLimit.NO_LIMIT_CLAIMED),
        ("drift +0.02", RegimeModel(Q, [0.14, -0.06], [0.2, 0.2]), 0.02,
         RecurrenceClass.TRANSIENT, AlmostSureLimit.TO_INFINITY),
    ]
    for name, m, drift, rc, lim in hand:
        c = classify(m)
        ok = c.recurrence_class == rc and c.as_limit == lim and abs(c.mean_drift - drift) <= 1e-15
        checks.append(_check(f"{name}: {c.recurrence_class.value}/{c.as_limit.value}",
                             c.mean_drift, drift, 1e-15, ok))
    return checks


def criterion_4(cfg):
    worst = 0.0
    grid = (0.1, 1.0, 10.0)
    for l0 in grid:
        for l1 in grid:
            for t in grid:
                f = lambda s: _sojourn_series(l0, l1, t, s)[0]
                # the density near s = t can be sharply peaked for large rates
                res = adaptive_gauss_legendre(f, 0.0, t, rtol=1e-12, atol=1e-16,
                                              breakpoints=[t * u for u in (0.5, 0.9, 0.99)])
                worst = max(worst, abs(res.value + math.exp(-l0 * t) - 1.0))
    h = estimate_occupation_histogram(TwoStateModel(1.0, 2.0), 1.0, 100, cfg.mc(1_000_000, 4))
    return [_check("max |continuous mass + atom - 1| on {0.1,1,10}^3", worst, 0.0, 1e-8),
            _check("KS sup distance, (1,2,1), 99% band", h.sup_distance, 0.0, h.ks_band),
            _check("atom frequency vs exp(-lambda0 t)", h.atom_frequency, h.atom_expected,
                   3 * h.atom_std_error)]


def criterion_5(cfg):
    checks = []
    for lam, delta, sigma in ((1.0, (1.0, 0.0), (0.2, 0.2)), (0.7, (0.08, -0.12), (0.3, 0.1)),
                              (3.0, (-0.2, 0.3), (0.1, 0.5))):
        m = TwoStateModel.from_deltas(lam, lam, delta, sigma)
        for t in (0.5, 1.0, 5.0):
            cm, c2 = closed_form_lambda_equal(m, t)
            r = lnx_moments(m, t)
            checks.append(_check(f"closed vs series mean, lambda={lam:g}, t={t:g}",
                                 cm, r.mean, 1e-8))
            checks.append(_check(f"closed vs series second moment, lambda={lam:g}, t={t:g}",
                                 c2, r.second_moment, 1e-8))
    rng = np.random.default_rng(cfg.master_seed + 5)
    for i in range(5):
        l0, l1 = rng.uniform(0.3, 3.0, 2)
        delta = rng.uniform(-0.3, 0.3, 2)
        sigma = rng.uniform(0.1, 0.5, 2)
        t = float(rng.uniform(0.5, 3.0))
        m = TwoStateModel.from_deltas(l0, l1, delta, sigma)
        r = lnx_moments(m, t)
        e1, e2 = estimate_lnX_moments(m, t, cfg.mc(1_000_000, 50 + i))
        checks.append(_check(f"set {i}: MC mean", e1.value, r.mean, 3 * e1.std_error))
        checks.append(_check(f"set {i}: MC second moment", e2.value, r.second_moment,
                             3 * e2.std_error))
    m = TwoStateModel.from_deltas(1.0, 1.0, (1.0, 0.0), (0.2, 0.2))
    checks.append(_check("E[Y_1] closed form pin", closed_form_lambda_equal(m, 1.0)[0],
                         0.75 - math.exp(-2.0) / 4, 1e-10))
    return checks


def criterion_6(cfg):
    m = TwoStateModel.from_deltas(1.0, 2.0, (0.08, -0.12), (0.2, 0.2))
    rate = asymptotic_rates(m)[0]
    gaps = [abs(lnx_moments(m, t).mean / t - rate) for t in (50.0, 100.0, 200.0)]
    return [_check("|E[Y_200]/200 - rate|", gaps[2], 0.0, 1e-2),
            _check("gap decreasing along t = 50, 100, 200", gaps[0] - gaps[2], 0.0, 0.0,
                   gaps[0] > gaps[1] > gaps[2]),
            _check("mean_rate vs almost_sure_growth", rate, almost_sure_growth(m), 1e-14)]


def criterion_7(cfg):
    checks = []
    grid = (0.5, 1.0, 2.0)
    passing = {v: True for v in VARIANTS}
    rows = []
    for i, l0 in enumerate(grid):
        for j, l1 in enumerate(grid):
            m = TwoStateModel.from_deltas(l0, l1, (-0.1, 0.1), (0.3, 0.3))
            q = FirstPassageQuery.from_log_distance(m, 1.0, 1.0)
            est = estimate_first_passage(q, cfg.mc(1_000_000, 70 + 3 * i + j))
            row = {"lambda0": l0, "lambda1": l1, "mc": est.value, "mc_se": est.std_error}
            for v in VARIANTS:
                b = bounds(q, variant=v)
                inside = (b.lower_raw - 3 * est.std_error <= est.value
                          <= b.upper_raw + 3 * est.std_error)
                ordered = b.lower_raw <= b.upper_raw + 1e-6
                passing[v] &= inside and ordered
                row[v] = {"lower": b.lower_raw, "upper": b.upper_raw, "inside": inside,
                          "ordered": ordered}
            rows.append(row)
            d = row[DEFAULT_VARIANT]
            checks.append(_check(f"({l0:g},{l1:g}) MC in [lower-3SE, upper+3SE] ({DEFAULT_VARIANT})",
                                 est.value, 0.5 * (d["lower"] + d["upper"]),
                                 0.5 * (d["upper"] - d["lower"]) + 3 * est.std_error,
                                 d["inside"] and d["ordered"]))
    m = TwoStateModel.from_deltas(1e-8, 1.0, (-0.1, 0.1), (0.3, 0.3))
    q = FirstPassageQuery.from_log_distance(m, 1.0, 1.0)
    b = bounds(q)
    ref = bm_no_cross(1.0, -0.1, 0.3, 1.0)
    checks.append(_check("lambda0=1e-8 lower vs bm_no_cross", b.lower, ref, 1e-6))
    checks.append(_check("lambda0=1e-8 upper vs bm_no_cross", b.upper, ref, 1e-6))
    winners = [v for v in VARIANTS if passing[v]]
    checks.append(_check(f"exactly one coefficient variant passes the grid: {winners}",
                         len(winners), 1, 0, winners == [DEFAULT_VARIANT]))
    return checks, {"grid": rows, "passing_variants": winners}


SLEPIAN_SETS = (
    # lambda0, lambda1, delta0, delta1, a_tilde, T
    (1.0, 1.0, -0.1, 0.1, 1.0, 1.0),
    (0.5, 2.0, -0.05, 0.05, 0.5, 1.0),
    (2.0, 0.5, 0.0, 0.1, 0.8, 2.0),
    (1.0, 1.0, -0.2, -0.1, 1.2, 1.0),
    (3.0, 1.0, 0.05, 0.1, 0.3, 0.5),
)


def criterion_8(cfg):
    checks = []
    for i, (l0, l1, d0, d1, at, T) in enumerate(SLEPIAN_SETS):
        m = TwoStateModel.from_deltas(l0, l1, (d0, d1), (0.4, 0.2))
        q = FirstPassageQuery.from_log_distance(m, at, T)
        direct = estimate_first_passage(q, cfg.mc(1_000_000, 80 + i))
        upper = slepian_upper(q, cfg.mc(100_000, 90 + i))
        js = math.hypot(direct.std_error, upper.std_error)
        checks.append(_check(f"set {i}: direct MC <= slepian_upper + 3 joint SE", direct.value,
                             upper.value, 3 * js, direct.value <= upper.value + 3 * js))
    # sigma1 -> sigma0 from below against the surrogate at sigma1 = sigma0
    s = 0.3
    near = TwoStateModel.from_deltas(1.0, 1.0, (-0.1, 0.1), (s, s * (1 - 1e-6)))
    equal = TwoStateModel.from_deltas(1.0, 1.0, (-0.1, 0.1), (s, s))
    a = slepian_upper(FirstPassageQuery.from_log_distance(near, 1.0, 1.0), cfg.mc(100_000, 96))
    b = slepian_functional(FirstPassageQuery.from_log_distance(equal, 1.0, 1.0), cfg.mc(100_000, 97))
    checks.append(_check("sigma1 -> sigma0 degeneration", a.value, b.value,
                         3 * math.hypot(a.std_error, b.std_error)))
    return checks


CRITERIA = (
    (1, "spectral anchor", criterion_1),
    (2, "moment Lyapunov exponent vs Rao-Blackwellized MC", criterion_2),
    (3, "classification consistency", criterion_3),
    (4, "sojourn law", criterion_4),
    (5, "log-price moments", criterion_5),
    (6, "long-time moment rates", criterion_6),
    (7, "barrier bound sandwich", criterion_7),
    (8, "Slepian comparison", criterion_8),
)


def run_criterion(number, cfg=ValidationConfig()):
    for k, name, fn in CRITERIA:
        if k == number:
            out = fn(cfg)
            checks, extra = out if isinstance(out, tuple) else (out, None)
            res = {"criterion": k, "name": name, "passed": all(c["passed"] for c in checks),
                   "checks": checks}
            if extra is not None:
                res["details"] = extra
            return res
    raise KeyError(number)


def run_validation(cfg=ValidationConfig(), only=None):
    """Run the criteria; returns (report, timings in seconds)."""
    results, timings = [], {}
    for k, _, _ in CRITERIA:
        if only is not None and k not in only:
            continue
        t0 = time.perf_counter()
        results.append(run_criterion(k, cfg))
        timings[k] = time.perf_counter() - t0
    report = {"master_seed": cfg.master_seed, "path_scale": cfg.path_scale,
              "passed": all(r["passed"] for r in results), "criteria": results}
    return report, timings


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
