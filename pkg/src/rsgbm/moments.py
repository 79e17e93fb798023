"""First and second moments of Y_t = ln(X_t / X_0) for the two-state chain
started in regime 0.

Given the chain, Y_t is Gaussian with mean delta0 alpha + delta1 beta and
variance sigma0^2 alpha + sigma1^2 beta, so both moments are expectations
over the occupation time alpha(t).  The general route sums the sojourn
series term by term, each term an integral over u = s / t in [0, 1].
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from .ctmc import SeriesConfig, as_two_state
from .errors import DomainError, NumericalError, TruncationError
from .quadrature import adaptive_gauss_legendre

INNER_RTOL = 1e-13
TAYLOR_CUTOFF = 1e-3


@dataclass(frozen=True)
class MomentResult:
    t: float
    mean: float
    second_moment: float
    truncation_bound: float
    terms_used: int

    @property
    def variance(self):
        v = self.second_moment - self.mean ** 2
        return max(v, 0.0)


def _mode(a, b, c):
    """Maximiser of u^a (1-u)^b e^{cu} on [0, 1]."""
    if a == 0 and b == 0:
        return 1.0 if c > 0 else 0.0
    if c == 0:
        return a / (a + b)
    q = a + b - c
    disc = math.sqrt(q * q + 4 * c * a)
    # the unique root of c u^2 + q u - a in [0, 1], cancellation-free
    return 2 * a / (q + disc) if q >= 0 else (disc - q) / (2 * c)


def _beta_exp_integral(log_coef, a, b, lt0, lt1, poly=None):
    """coef * int_0^1 poly(u) u^a (1-u)^b exp(-lt0 u - lt1 (1-u)) du.

    The weight is normalised by its value at the peak; the peak's log
    (coefficient included) is added back at the end, so nothing overflows
    and the integrand carries no large cancelling logarithms.
    """
    c = lt1 - lt0
    m = min(max(_mode(a, b, c), 1e-300), 1 - 1e-16)
    log_peak = (log_coef + (a * math.log(m) if a else 0.0)
                + (b * math.log1p(-m) if b else 0.0) - lt0 * m - lt1 * (1 - m))

    def f(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            shape = c * (u - m)
            if a:
                shape = shape + a * np.log(u / m)
            if b:
                shape = shape + b * np.log1p((m - u) / (1 - m))
        w = np.exp(shape)
        return w if poly is None else w * poly(u)

    slope = (a / m if a else 0.0) - (b / (1 - m) if b else 0.0) + c
    curv = (a / m ** 2 if a else 0.0) + (b / (1 - m) ** 2 if b else 0.0)
    width = 1.0 / math.sqrt(curv + slope * slope) if curv + slope * slope > 0 else 1.0
    breaks = [m + sgn * j * width for j in (0.5, 1, 3, 6, 10, 20) for sgn in (-1, 1)] + [m]
    res = adaptive_gauss_legendre(f, 0.0, 1.0, rtol=INNER_RTOL, atol=1e-300,
                                  breakpoints=[x for x in breaks if 0 < x < 1])
    if res.value == 0.0:
        return 0.0
    return math.exp(log_peak + math.log(res.value))


def lnx_moments(model, t, series=SeriesConfig()):
    """E[Y_t] and E[Y_t^2] from the sojourn series.

    Truncation uses N(t) <= Poisson(max(lambda) t) stochastically: after k
    terms of both series only paths with at least 2k+1 switches are
    missing, so each omitted tail is bounded by sup(integrand) times the
    Poisson upper tail.
    """
    m = as_two_state(model)
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    l0, l1 = m.lambda0, m.lambda1
    d0, d1, s0, s1 = m.delta0, m.delta1, m.sigma0, m.sigma1
    lt0, lt1 = l0 * t, l1 * t
    lmax_t = max(l0, l1) * t
    atom = math.exp(-lt0)

    def h(u):
        return t * t * (d0 * u + d1 * (1 - u)) ** 2 + s0 ** 2 * t * u + s1 ** 2 * t * (1 - u)

    h_max = t * t * max(d0 * d0, d1 * d1) + t * max(s0 * s0, s1 * s1)

    alpha_terms, second_terms = [], []
    lg_t = math.log(t)
    lg0, lg1 = math.log(l0), math.log(l1)
    for k in range(1, series.max_terms + 1):
        ck1 = k * lg0 + (k - 1) * lg1 - 2 * gammaln(k)
        ck2 = k * (lg0 + lg1) - gammaln(k) - gammaln(k + 1)
        alpha_terms.append(
            _beta_exp_integral(ck1 + 2 * k * lg_t, k, k - 1, lt0, lt1)
            + _beta_exp_integral(ck2 + (2 * k + 1) * lg_t, k + 1, k - 1, lt0, lt1))
        second_terms.append(
            _beta_exp_integral(ck1 + (2 * k - 1) * lg_t, k - 1, k - 1, lt0, lt1, h)
            + _beta_exp_integral(ck2 + 2 * k * lg_t, k, k - 1, lt0, lt1, h))
        p_tail = float(gammainc(2 * k + 1, lmax_t))
        ea_series = math.fsum(alpha_terms)
        e2_series = math.fsum(second_terms)
        tail_a = t * p_tail
        tail_2 = h_max * p_tail
        if tail_a <= series.eps * ea_series and tail_2 <= series.eps * e2_series:
            break
    else:
        raise TruncationError(
            f"moment series did not converge within {series.max_terms} terms",
            tail_bound=max(tail_a, tail_2), terms=series.max_terms)

    e_alpha = t * atom + ea_series
    mean = t * d1 + (d0 - d1) * e_alpha
    second = (d0 * d0 * t * t + s0 * s0 * t) * atom + e2_series
    var = second - mean * mean
    if var < -1e-10 * max(1.0, second):
        raise NumericalError(f"negative variance {var!r} at t={t}")
    bound = max(abs(d0 - d1) * tail_a, tail_2)
    return MomentResult(float(t), mean, second, bound, k)


def mean_lnX(model, t, series=SeriesConfig()):
    return lnx_moments(model, t, series).mean


def second_moment_lnX(model, t, series=SeriesConfig()):
    return lnx_moments(model, t, series).second_moment


def occupation_moments_equal_rates(lam, t):
    """(E[alpha(t)], E[alpha(t)^2]) when lambda0 = lambda1 = lam.

    Below lam * t = 1e-3 a Taylor polynomial replaces the cosh/sinh
    expressions, whose 1/x and 1/x^2 terms cancel catastrophically.
    """
    x = lam * t
    if x < TAYLOR_CUTOFF:
        m1 = 1 - x / 2 + x ** 2 / 3 - x ** 3 / 6 + x ** 4 / 15 - x ** 5 / 45 + 2 * x ** 6 / 315
        m2 = (1 - 2 * x / 3 + 5 * x ** 2 / 12 - x ** 3 / 5 + 7 * x ** 4 / 90
              - 8 * x ** 5 / 315 + x ** 6 / 140)
    else:
        ch, sh, e = math.cosh(x), math.sinh(x), math.exp(-x)
        m1 = 0.5 * e * (ch + (1 + 1 / x) * sh)
        m2 = 0.25 * e * (ch + sh + (ch + 3 * sh) / x - sh / x ** 2)
    return t * m1, t * t * m2


def closed_form_lambda_equal(model, t):
    """(E[Y_t], E[Y_t^2]) in closed form for equal switching rates."""
    m = as_two_state(model)
    l0, l1 = m.lambda0, m.lambda1
    if abs(l0 - l1) > 1e-12 * max(l0, l1):
        raise DomainError(f"closed form needs lambda0 == lambda1, got {l0}, {l1}")
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    d0, d1, s0, s1 = m.delta0, m.delta1, m.sigma0, m.sigma1
    ea, ea2 = occupation_moments_equal_rates(l0, t)
    eb = t - ea
    eb2 = t * t - 2 * t * ea + ea2
    eab = t * ea - ea2
    mean = d0 * ea + d1 * eb
    second = (d0 * d0 * ea2 + d1 * d1 * eb2 + 2 * d0 * d1 * eab
              + s0 * s0 * ea + s1 * s1 * eb)
    return mean, second


def asymptotic_rates(model):
    """Limits of E[Y_t]/t and E[Y_t^2]/t^2."""
    m = as_two_state(model)
    rate = (m.lambda1 * m.delta0 + m.lambda0 * m.delta1) / (m.lambda0 + m.lambda1)
    return rate, rate * rate


def moments_csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mean", "second_moment", "variance", "terms_used"])
    for r in results:
        w.writerow([format(r.t, ".17g"), format(r.mean, ".17g"),
                    format(r.second_moment, ".17g"), format(r.variance, ".17g"),
                    r.terms_used])
    return buf.getvalue()
