"""Barrier-survival probabilities P(tau_a > T) for the two-state model.

With equal volatilities, ln X stays above ln a iff sigma B_t + g(t) > 0,
where g(t) = a_tilde + delta0 alpha(t) + delta1 beta(t).  Replacing g by
the piecewise-linear envelopes g_l <= g <= g_u (one kink at the terminal
occupation time) gives conditional survival probabilities F_l, F_u that
are integrated against the law of alpha(T).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, log_ndtr

from .ctmc import SeriesConfig, TwoStateModel, _sojourn_series, as_two_state
from .errors import DomainError, NumericalError
from .quadrature import QuadConfig, adaptive_gauss_legendre

log = logging.getLogger(__name__)

VARIANTS = ("density", "printed")
# Chosen by the sandwich check in rsgbm.validation (criterion 7).
DEFAULT_VARIANT = "density"
SQRT2 = math.sqrt(2.0)


def phi(z):
    """Standard normal CDF, 0.5 erfc(-z / sqrt 2)."""
    out = 0.5 * erfc(-np.asarray(z, dtype=float) / SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def bm_no_cross(a_tilde, drift, sigma, T):
    """P(a_tilde + drift t + sigma W_t > 0 for all t <= T)."""
    if not (a_tilde > 0 and sigma > 0 and T > 0):
        raise DomainError("bm_no_cross needs a_tilde > 0, sigma > 0, T > 0")
    if math.isinf(a_tilde):
        return 1.0
    sd = sigma * math.sqrt(T)
    first = phi((drift * T + a_tilde) / sd)
    second = math.exp(-2 * drift * a_tilde / sigma ** 2 + float(log_ndtr((drift * T - a_tilde) / sd)))
    return first - second


def bridge_no_cross(y_start, y_end, sigma, dt, barrier=0.0):
    """Probability that a Brownian bridge from y_start to y_end over time dt
    (volatility sigma) stays above ``barrier``.  Zero if an endpoint is at or
    below the barrier; with sigma == 0 the path is the straight segment.
    """
    y0 = np.asarray(y_start, dtype=float) - barrier
    y1 = np.asarray(y_end, dtype=float) - barrier
    var = np.asarray(sigma, dtype=float) ** 2 * dt
    above = (y0 > 0) & (y1 > 0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        p = -np.expm1(-2 * y0 * y1 / var)
    p = np.where(above, np.where(var > 0, p, 1.0), 0.0)
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class FirstPassageQuery:
    model: TwoStateModel
    x: float
    a: float
    T: float

    def __post_init__(self):
        object.__setattr__(self, "model", as_two_state(self.model))
        if not (0 < self.a < self.x):
            raise DomainError(f"barrier must satisfy 0 < a < x, got a={self.a}, x={self.x}")
        if not self.T > 0:
            raise DomainError(f"horizon must be > 0, got {self.T}")

    @property
    def a_tilde(self):
        return -math.log(self.a / self.x)

    @classmethod
    def from_log_distance(cls, model, a_tilde, T, x=1.0):
        return cls(model, x, x * math.exp(-a_tilde), T)

    def to_dict(self):
        m = self.model
        return {"lambda0": m.lambda0, "lambda1": m.lambda1, "mu": list(m.mu),
                "sigma": list(m.sigma), "x": self.x, "a": self.a, "T": self.T,
                "a_tilde": self.a_tilde}


class BarrierEnvelope:
    """g and its envelopes g_l <= g <= g_u along one path of the chain."""

    def __init__(self, query, path):
        m = query.model
        self.a_tilde = query.a_tilde
        self.d0, self.d1 = m.delta0, m.delta1
        self.T = query.T
        knots = np.concatenate([[0.0], path.jump_times[path.jump_times < self.T], [self.T]])
        in0 = np.array([path.state_at(s) == 0 for s in knots[:-1]])
        self._knots = knots
        self._alpha = np.concatenate([[0.0], np.cumsum(np.where(in0, np.diff(knots), 0.0))])
        self.alpha_T = float(self._alpha[-1])
        self.beta_T = self.T - self.alpha_T

    def alpha(self, t):
        return np.interp(t, self._knots, self._alpha)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        al = self.alpha(t)
        return self.a_tilde + self.d0 * al + self.d1 * (t - al)

    def g_u(self, t):
        t = np.asarray(t, dtype=float)
        b = self.beta_T
        return self.a_tilde + self.d1 * np.minimum(t, b) + self.d0 * np.maximum(t - b, 0.0)

    def g_l(self, t):
        t = np.asarray(t, dtype=float)
        a = self.alpha_T
        return self.a_tilde + self.d0 * np.minimum(t, a) + self.d1 * np.maximum(t - a, 0.0)


def _require_equal_sigma(model):
    s0, s1 = model.sigma
    if abs(s0 - s1) > 1e-12 * max(s0, s1):
        raise DomainError(f"envelope bounds need sigma0 == sigma1, got {s0}, {s1}")
    return s0


def _survival_integrand(a_tilde, sigma, first_len, first_drift, second_len, second_drift,
                        second_exp_denominator):
    """y -> (first-leg bridge survival) x (second-leg survival) x (Gaussian
    density of the scaled level y at the kink)."""
    v = first_len
    w = second_len
    center = -(first_drift * v + a_tilde) / sigma
    norm = 1.0 / math.sqrt(2 * math.pi * v)
    root_w = math.sqrt(w)
    mw = second_drift * w / sigma

    def f(y):
        cross = -np.expm1(2 * a_tilde * y / (sigma * v))
        bracket = (0.5 * erfc(-((mw - y) / root_w) / SQRT2)
                   - np.exp(2 * second_drift * y / second_exp_denominator
                            + log_ndtr((mw + y) / root_w)))
        return cross * bracket * norm * np.exp(-(y - center) ** 2 / (2 * v))

    return f


def _conditional_survival(a_tilde, sigma, first_len, first_drift, second_len,
                          second_drift, second_exp_denominator, quad):
    """Integral of the survival integrand over y <= 0; returns (value, abs_error)."""
    v = first_len
    root_w = math.sqrt(second_len)
    center = -(first_drift * v + a_tilde) / sigma
    L = a_tilde / sigma + abs(first_drift) * v / sigma + 8 * math.sqrt(v)
    f = _survival_integrand(a_tilde, sigma, first_len, first_drift, second_len, second_drift,
                            second_exp_denominator)

    sd = math.sqrt(v)
    breaks = [center + j * sd for j in range(-8, 9)]
    kink = sigma * v / (2 * a_tilde)
    breaks += [-j * kink for j in (0.5, 1, 3, 10)] + [-j * root_w for j in (0.5, 1, 3)]
    breaks = [b for b in breaks if -L < b < 0]
    try:
        res = adaptive_gauss_legendre(f, -L, 0.0, rtol=quad.rtol, atol=quad.atol,
                                      order=quad.order, breakpoints=breaks,
                                      max_panels=quad.max_panels)
    except NumericalError as exc:
        raise NumericalError(f"conditional survival integral failed: {exc}") from exc
    return res.value, res.error


def _check_t(t, T):
    if not 0 < t < T:
        raise DomainError(f"t must lie in (0, {T}), got {t!r}")


def F_u(t, query, quad=QuadConfig(rtol=1e-12), variant=DEFAULT_VARIANT):
    """Survival probability under the upper envelope given alpha(T) = t.

    The envelope rises with delta1 for the first T - t, then with delta0.
    """
    _check_t(t, query.T)
    sigma = _require_equal_sigma(query.model)
    m = query.model
    return _conditional_survival(query.a_tilde, sigma, query.T - t, m.delta1, t,
                                 m.delta0, sigma, quad)[0]


def F_l(t, query, quad=QuadConfig(rtol=1e-12), variant=DEFAULT_VARIANT):
    """Survival probability under the lower envelope given alpha(T) = t.

    The ``"printed"`` variant uses a_tilde instead of sigma in the
    denominator of the reflection exponent on the second leg.
    """
    _check_t(t, query.T)
    if variant not in VARIANTS:
        raise DomainError(f"unknown coefficient variant {variant!r}")
    sigma = _require_equal_sigma(query.model)
    m = query.model
    denom = query.a_tilde if variant == "printed" else sigma
    return _conditional_survival(query.a_tilde, sigma, t, m.delta0, query.T - t,
                                 m.delta1, denom, quad)[0]


@dataclass(frozen=True)
class BoundsResult:
    lower: float
    upper: float
    no_switch_term: float
    truncation_bound: float
    quadrature_error_estimate: float
    coefficient_variant: str
    lower_raw: float
    upper_raw: float

    def to_dict(self, query=None):
        out = {}
        if query is not None:
            out["query"] = query.to_dict()
        out.update(lower=self.lower, upper=self.upper, no_switch_term=self.no_switch_term,
                   coefficient_variant=self.coefficient_variant,
                   truncation_bound=self.truncation_bound,
                   quadrature_error_estimate=self.quadrature_error_estimate)
        return out


def _switch_integral(query, which, series, quad, variant):
    """int_0^T F(t) D(t) dt with D the sojourn density (or its printed
    reweighting), substituting t = T sin^2(theta).
    """
    m = query.model
    T = query.T
    sigma = m.sigma0
    first_scale = 1.0 / m.lambda0 if variant == "printed" else 1.0
    inner = QuadConfig(rtol=quad.rtol, atol=quad.atol, order=quad.order,
                       max_panels=quad.max_panels)
    if which == "upper":
        def cond(t):
            return _conditional_survival(query.a_tilde, sigma, T - t, m.delta1, t,
                                         m.delta0, sigma, inner)
    else:
        denom = query.a_tilde if variant == "printed" else sigma

        def cond(t):
            return _conditional_survival(query.a_tilde, sigma, t, m.delta0, T - t,
                                         m.delta1, denom, inner)

    inner_err = [0.0]

    def integrand(theta):
        st = np.sin(theta)
        ct = np.cos(theta)
        t = T * st * st
        jac = 2 * T * st * ct
        dens, _, _ = _sojourn_series(m.lambda0, m.lambda1, T, t, first_scale,
                                     series.eps, series.max_terms)
        vals = np.empty_like(t)
        for i, ti in enumerate(t):
            if 0 < ti < T:
                v, e = cond(ti)
                inner_err[0] = max(inner_err[0], e)
                vals[i] = v
            else:
                vals[i] = 0.0
        return vals * dens * jac

    res = adaptive_gauss_legendre(integrand, 0.0, 0.5 * math.pi, rtol=quad.rtol,
                                  atol=quad.atol, order=quad.order,
                                  max_panels=quad.max_panels)
    mass = adaptive_gauss_legendre(
        lambda th: _sojourn_series(m.lambda0, m.lambda1, T, T * np.sin(th) ** 2, first_scale,
                                   series.eps, series.max_terms)[0]
        * 2 * T * np.sin(th) * np.cos(th), 0.0, 0.5 * math.pi, rtol=1e-10).value
    err = res.error + inner_err[0] * mass
    return res.value, err, series.eps * mass


def bounds(query, series=SeriesConfig(), quad=QuadConfig(rtol=1e-10), variant=DEFAULT_VARIANT):
    """Lower and upper bounds on P(tau_a > T) for equal volatilities.

    Requires delta0 <= delta1 and the chain started in regime 0; states are
    never relabelled implicitly.
    """
    if variant not in VARIANTS:
        raise DomainError(f"unknown coefficient variant {variant!r}")
    m = query.model
    sigma = _require_equal_sigma(m)
    if m.delta0 > m.delta1:
        raise DomainError(f"bounds need delta0 <= delta1, got {m.delta0} > {m.delta1}; "
                          "relabel the regimes explicitly")
    T = query.T
    no_switch = math.exp(-m.lambda0 * T) * bm_no_cross(query.a_tilde, m.delta0, sigma, T)
    up, up_err, up_trunc = _switch_integral(query, "upper", series, quad, variant)
    lo, lo_err, lo_trunc = _switch_integral(query, "lower", series, quad, variant)
    upper_raw = no_switch + up
    lower_raw = no_switch + lo
    tol = 1e-6
    if lower_raw > upper_raw + tol:
        raise NumericalError(f"lower bound {lower_raw!r} exceeds upper bound {upper_raw!r}")
    for name, v in (("lower", lower_raw), ("upper", upper_raw)):
        if v < -tol or v > 1 + tol:
            log.warning("%s bound %.17g outside [0, 1] before clipping (variant %s)",
                        name, v, variant)
    lower = min(max(lower_raw, 0.0), 1.0)
    upper = min(max(upper_raw, 0.0), 1.0)
    return BoundsResult(lower, max(upper, lower), no_switch, max(up_trunc, lo_trunc),
                        max(up_err, lo_err), variant, lower_raw, upper_raw)


def slepian_upper(query, config, diagnostic_zero_eta=False):
    """Monte Carlo upper bound on P(tau_a > T) for sigma0 > sigma1 > 0.

    Estimates the survival probability of the surrogate
    sqrt(sigma0^2 - sigma1^2) B_{alpha(t)} + sigma1 sqrt(t) eta0 + g(t),
    with eta0 a single standard normal per path.
    """
    from .montecarlo import slepian_functional
    s0, s1 = query.model.sigma
    if not s0 > s1 > 0:
        raise DomainError(f"slepian_upper needs sigma0 > sigma1 > 0, got {s0}, {s1}")
    return slepian_functional(query, config, zero_eta=diagnostic_zero_eta)
