"""Moment Lyapunov exponents and recurrence classification."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .ctmc import as_regime, stationary_distribution
from .errors import DomainError, NumericalError

CLOSED_FORM_TOL = 1e-10


class RecurrenceClass(str, enum.Enum):
    TRANSIENT = "TRANSIENT"
    NULL_RECURRENT = "NULL_RECURRENT"


class AlmostSureLimit(str, enum.Enum):
    TO_INFINITY = "TO_INFINITY"
    TO_ZERO = "TO_ZERO"
    NO_LIMIT_CLAIMED = "NO_LIMIT_CLAIMED"


@dataclass(frozen=True, eq=False)
class SpectralReport:
    p: float
    A_p: np.ndarray
    eigenvalues: np.ndarray
    eta_p: float

    @property
    def growth_rate(self):
        return -self.eta_p + 0.0

    @property
    def leading_eigenvalue(self):
        return self.eigenvalues[np.argmax(self.eigenvalues.real)]


@dataclass(frozen=True)
class Classification:
    mean_drift: float
    recurrence_class: RecurrenceClass
    as_limit: AlmostSureLimit
    tolerance_used: float
    scale: float

    def to_dict(self):
        return {"mean_drift": self.mean_drift,
                "recurrence_class": self.recurrence_class.value,
                "as_limit": self.as_limit.value,
                "tolerance_used": self.tolerance_used,
                "scale": self.scale}


def _check_p(p):
    if not (p >= 0 and math.isfinite(p)):
        raise DomainError(f"moment order must be a finite p >= 0, got {p!r}")


def build_Ap(model, p):
    """Q plus diag(lambda_i(p))."""
    _check_p(p)
    model = as_regime(model)
    return model.Q + np.diag(model.lambda_p(p))


def eig2x2(A):
    """Eigenvalues of a 2x2 real matrix by the quadratic formula."""
    a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    half_tr = 0.5 * (a + d)
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc >= 0:
        r = math.sqrt(disc)
        return np.array([half_tr + r, half_tr - r], dtype=complex)
    r = math.sqrt(-disc)
    return np.array([complex(half_tr, r), complex(half_tr, -r)])


def eigenvalues(A):
    """All eigenvalues of a small dense nonsymmetric matrix.

    LAPACK geev (balancing, Hessenberg reduction, shifted QR).  For 2x2
    input the result is checked against the quadratic formula.
    """
    A = np.asarray(A, dtype=float)
    if A.shape == (1, 1):
        return np.array([complex(A[0, 0])])
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed to converge: {exc}") from exc
    ev = ev.astype(complex)
    if A.shape == (2, 2):
        ref = eig2x2(A)
        got = ev[np.lexsort((-ev.imag, -ev.real))]
        ref = ref[np.lexsort((-ref.imag, -ref.real))]
        scale = max(1.0, float(np.abs(A).max()))
        if np.max(np.abs(got - ref)) > CLOSED_FORM_TOL * scale:
            raise NumericalError(f"QR eigenvalues {got} disagree with closed form {ref}")
    return ev


def spectral_report(model, p):
    A = build_Ap(model, p)
    ev = eigenvalues(A)
    A.setflags(write=False)
    # + 0.0 turns -0.0 into 0.0
    return SpectralReport(float(p), A, ev, -float(np.max(ev.real)) + 0.0)


def eta_p(model, p):
    """Minus the spectral abscissa of A_p; -eta_p is the p-th moment growth rate."""
    return spectral_report(model, p).eta_p


@dataclass(frozen=True)
class LyapunovCurve:
    rows: list  # SpectralReport per grid point
    second_differences: np.ndarray
    convexity_violations: list  # grid indices whose second difference < -tol

    @property
    def p(self):
        return np.array([r.p for r in self.rows])

    @property
    def growth_rate(self):
        return np.array([r.growth_rate for r in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "growth_rate", "eta_p", "max_eig_real", "max_eig_imag"])
        for r in self.rows:
            lead = r.leading_eigenvalue
            w.writerow([format(v, ".17g") for v in
                        (r.p, r.growth_rate, r.eta_p, lead.real, lead.imag)])
        return buf.getvalue()


def lyapunov_curve(model, p_grid, convexity_tol=1e-8):
    """-eta_p along an increasing grid, with a numerical convexity check."""
    p_grid = [float(p) for p in p_grid]
    if not p_grid:
        raise DomainError("p_grid must be nonempty")
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise DomainError("p_grid must be strictly increasing")
    rows = [spectral_report(model, p) for p in p_grid]
    g = np.array([r.growth_rate for r in rows])
    p = np.array(p_grid)
    if len(p) >= 3:
        # divided second differences, comparable on nonuniform grids
        d1 = np.diff(g) / np.diff(p)
        d2 = 2 * np.diff(d1) / (p[2:] - p[:-2])
    else:
        d2 = np.zeros(0)
    bad = [int(i) + 1 for i in np.flatnonzero(d2 < -convexity_tol)]
    return LyapunovCurve(rows, d2, bad)


def almost_sure_growth(model):
    """Long-run rate of ln X_t / t: the stationary mean of delta."""
    model = as_regime(model)
    pi = stationary_distribution(model.Q)
    return math.fsum(pi * model.delta)


def classify(model, tolerance=None):
    """Transient with a definite limit when |mean drift| > tol, else null recurrent.

    The default tolerance is 1e-12 * max_i(|mu_i| + sigma_i^2).
    """
    model = as_regime(model)
    scale = float(np.max(np.abs(model.mu) + model.sigma ** 2))
    tol = 1e-12 * scale if tolerance is None else float(tolerance)
    drift = almost_sure_growth(model)
    if drift > tol:
        return Classification(drift, RecurrenceClass.TRANSIENT, AlmostSureLimit.TO_INFINITY, tol, scale)
    if drift < -tol:
        return Classification(drift, RecurrenceClass.TRANSIENT, AlmostSureLimit.TO_ZERO, tol, scale)
    return Classification(drift, RecurrenceClass.NULL_RECURRENT, AlmostSureLimit.NO_LIMIT_CLAIMED, tol, scale)
