"""Explicit exponential-decay certificates and empirical decay rates.

Every certificate has the form

    dist_sq(t) <= Lambda * exp(-2 lam t) * dist_sq(0),   Lambda = C2 / C1,

where ``C1, C2`` are the equivalence constants between the modified entropy
``E`` and ``dist_sq`` and ``lam`` is the Gronwall rate of ``E``.  Both depend
on a free coupling weight ``eps`` (and, in 3D, a Young-inequality weight
``eta``); we report the largest ``lam`` the constant chain allows.

The 3D equivalence constants come from the 1D argument with
``|int j . grad phi| <= 2 sqrt(3) C_R dist_sq``, which follows from
``|j|**2 <= 2 S`` and ``(rho - 6 m_inf)**2 <= 6 S`` with
``S = sum_i (u_i - m_inf)**2 + (v_i - m_inf)**2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import AdmissibilityError, NoCertificateError
from .interaction import InteractionModel
from .poisson import elliptic_constant

SCHEMA_VERSION = 1
SQRT3 = math.sqrt(3.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Theorem(str, Enum):
    T1D_type3 = "T1D_type3"
    T1D_type1 = "T1D_type1"
    T3D_type3 = "T3D_type3"
    T3D_type1 = "T3D_type1"


@dataclass
class RateBound:
    theorem: Theorem
    lam: float
    Lambda: float
    eps_star: float
    eta_star: Optional[float]
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "theorem": self.theorem.value,
            "lambda": self.lam,
            "Lambda": self.Lambda,
            "eps_star": self.eps_star,
            "eta_star": self.eta_star,
            "constants": dict(self.constants),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RateBound":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported certificate schema {d.get('schema_version')}")
        return cls(Theorem(d["theorem"]), d["lambda"], d["Lambda"], d["eps_star"],
                   d["eta_star"], dict(d["constants"]))

    def envelope(self, t, dist0: float):
        return self.Lambda * np.exp(-2.0 * self.lam * np.asarray(t)) * dist0


@dataclass
class FitResult:
    lambda_emp: float
    window: tuple[float, float]
    r_squared: float
    samples: int = 0

    def to_dict(self):
        return {"lambda_emp": self.lambda_emp, "window": list(self.window),
                "r_squared": self.r_squared, "samples": self.samples}


# ---------------------------------------------------------------- constants

def eps_window_1d(M: float, C_R: float) -> float:
    return 1.0 / (4.0 * M * C_R)


def eps_window_3d(M: float, C_R: float) -> float:
    return 1.0 / (4.0 * SQRT3 * M * C_R)


def equivalence_constants_1d(M, m_inf, C_R, eps):
    """``(C1, C2)`` with ``dist_sq / C2 <= E <= dist_sq / C1`` in 1D."""
    if not 0 < eps < eps_window_1d(M, C_R):
        raise AdmissibilityError(f"eps={eps} outside (0, 1/(4 M C_R)) = (0, {eps_window_1d(M, C_R)})")
    return m_inf / (1 + 2 * eps * C_R * m_inf), 2 * M / (1 - 4 * eps * C_R * M)


def equivalence_constants_3d(M, m_inf, C_R, eps):
    if not 0 < eps < eps_window_3d(M, C_R):
        raise AdmissibilityError(f"eps={eps} outside (0, {eps_window_3d(M, C_R)})")
    return (m_inf / (1 + 2 * SQRT3 * eps * C_R * m_inf),
            2 * M / (1 - 4 * SQRT3 * eps * C_R * M))


# ---------------------------------------------------------------- objectives
# Each objective is vectorised over eps (and eta) and returns the rate lam.

def _lam_1d(eps, A, B, m_inf, c, C_R):
    """``C1(eps) * min(eps c / 2, A - B eps)``."""
    eps = np.asarray(eps, dtype=np.float64)
    C1 = m_inf / (1 + 2 * eps * C_R * m_inf)
    return C1 * np.minimum(0.5 * eps * c, A - B * eps)


def _lam_3d(eps, eta, a, p, q, m_inf, c, C_R):
    """``3 C1(eps) * min(a - eps (p/eta + c/2), eps/6 (c/3 - eta q))``."""
    eps = np.asarray(eps, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    C1 = m_inf / (1 + 2 * SQRT3 * eps * C_R * m_inf)
    first = a - eps * (p / eta + 0.5 * c)
    second = eps / 6.0 * (c / 3.0 - eta * q)
    return 3.0 * C1 * np.minimum(first, second)


@dataclass(frozen=True)
class RateProblem:
    """The parameter-free data of one theorem's constant chain."""

    dim: int
    m_inf: float
    M: float
    c: float
    C_R: float
    A: float       # first-branch constant: kappa3/M (1D), kappa3/(2M) (3D), or the type-1 floor
    B: float       # 1D: coefficient of eps in the second branch
    kappa_hi: float  # kappa4 (type 3) or kappa1 (type 1); 3D only

    @property
    def eps_max(self) -> float:
        return eps_window_1d(self.M, self.C_R) if self.dim == 1 else eps_window_3d(self.M, self.C_R)

    @property
    def p(self) -> float:
        return 1.5 * self.kappa_hi * self.C_R + self.c * self.C_R / 3.0

    @property
    def q(self) -> float:
        return self.c * self.C_R / 3.0 + 3.0 * self.kappa_hi * self.C_R

    @property
    def eta_max(self) -> float:
        return self.c / (self.c * self.C_R + 9.0 * self.kappa_hi * self.C_R)

    def lam(self, eps, eta=None):
        if self.dim == 1:
            return _lam_1d(eps, self.A, self.B, self.m_inf, self.c, self.C_R)
        return _lam_3d(eps, eta, self.A, self.p, self.q, self.m_inf, self.c, self.C_R)


def problem_1d_type3(kappa3, kappa4, M, m_inf, c, C_R):
    return RateProblem(1, m_inf, M, c, C_R, kappa3 / M, kappa4**2 * C_R**2 / (2 * c) + c, kappa4)


def problem_1d_type1(alpha, kappa1, k1_inf, M, m_inf, c, C_R):
    return RateProblem(1, m_inf, M, c, C_R, (2 * M) ** (alpha - 1) * k1_inf,
                       kappa1 * C_R**2 / (2 * c) + c, kappa1)


def problem_3d_type3(kappa3, kappa4, M, m_inf, c, C_R):
    return RateProblem(3, m_inf, M, c, C_R, kappa3 / (2 * M), math.nan, kappa4)


def problem_3d_type1(alpha, kappa1, k1_inf, M, m_inf, c, C_R):
    return RateProblem(3, m_inf, M, c, C_R, 0.5 * (6 * M) ** (alpha - 1) * k1_inf, math.nan, kappa1)


# ---------------------------------------------------------------- maximisation

def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, rtol: float = 1e-11):
    """Maximise a unimodal ``f`` on the open interval ``(lo, hi)``.

    The bracket shrinks until it is below ``tol`` and below ``rtol`` times
    its midpoint, so small optima are located to full relative accuracy too.
    Only interior points are ever evaluated.  Returns ``(x, f(x))`` for the
    best point seen.
    """
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    best = (x1, f1) if f1 >= f2 else (x2, f2)
    while b - a > min(tol, rtol * 0.5 * abs(a + b)):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        for x, fx in ((x1, f1), (x2, f2)):
            if fx > best[1]:
                best = (x, fx)
    mid = 0.5 * (a + b)
    fm = f(mid)
    if fm >= best[1]:
        best = (mid, fm)
    return best


def maximize(problem: RateProblem, tol: float = 1e-10):
    """``(lam*, eps*, eta*)``; ``eta*`` is None in 1D."""
    if problem.dim == 1:
        eps, lam = golden_section_max(lambda e: float(problem.lam(e)), 0.0, problem.eps_max, tol)
        return lam, eps, None

    def inner(eta):
        return golden_section_max(lambda e: float(problem.lam(e, eta)), 0.0, problem.eps_max, tol)

    with np.errstate(divide="ignore", invalid="ignore"):
        eta, lam = golden_section_max(lambda h: inner(h)[1], 0.0, problem.eta_max, tol)
    eps, lam = inner(eta)
    return lam, eps, eta


def _zoom_1d(f_rows, lo, hi, n_first, n_zoom=1001, levels=8):
    """Brute-force maximum of unimodal rows by grid search with zooming.

    ``f_rows(x)`` evaluates an ``(R, N)`` array of abscissae row by row; each
    row has its own interval ``[lo[r], hi[r]]``.  For a unimodal function the
    maximiser lies between the neighbours of the best grid sample, so each
    zoom keeps the true maximum inside the bracket.
    """
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    best_x = best_f = None
    n = n_first
    for _ in range(levels):
        frac = np.linspace(0.0, 1.0, n)
        x = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        fx = f_rows(x)
        i = np.argmax(fx, axis=1)
        rows = np.arange(len(lo))
        bx, bf = x[rows, i], fx[rows, i]
        if best_f is None:
            best_x, best_f = bx, bf
        else:
            better = bf > best_f
            best_x = np.where(better, bx, best_x)
            best_f = np.where(better, bf, best_f)
        step = (hi - lo) / (n - 1)
        lo, hi = np.maximum(lo, bx - step), np.minimum(hi, bx + step)
        n = n_zoom
    return best_x, best_f


def grid_oracle(problem: RateProblem, n_eps: Optional[int] = None, n_eta: int = 300):
    """Independent dense-grid maximisation (no golden section).

    1D uses ``n_eps = 10**5`` initial samples, 3D a ``300 x 300`` initial
    grid; both zoom in around the best sample until the bracket is tiny.
    The open end of the eps window is approached to ``1e-14`` relative.
    """
    # both ends of each window are open; the objective vanishes at the lower one
    eps_lo, eps_hi = problem.eps_max * 1e-12, problem.eps_max * (1 - 1e-14)
    if problem.dim == 1:
        n_eps = n_eps or 100_000
        x, fx = _zoom_1d(lambda e: problem.lam(e), [eps_lo], [eps_hi], n_eps)
        return float(fx[0]), float(x[0]), None
    n_eps = n_eps or 300
    eta_lo, eta_hi = problem.eta_max * 1e-12, problem.eta_max * (1 - 1e-14)

    def outer(etas):
        flat = etas.ravel()
        _, best = _zoom_1d(lambda e: problem.lam(e, flat[:, None]), np.full(flat.size, eps_lo),
                           np.full(flat.size, eps_hi), n_eps, n_zoom=301, levels=7)
        return best.reshape(etas.shape)

    eta, lam = _zoom_1d(outer, [eta_lo], [eta_hi], n_eta, n_zoom=61, levels=9)
    eps, lam_in = _zoom_1d(lambda e: problem.lam(e, eta[0]), [eps_lo], [eps_hi], 100_000)
    return float(lam_in[0]), float(eps[0]), float(eta[0])


# ---------------------------------------------------------------- certificates

def _check_common(M, m_inf, c):
    if not (m_inf > 0 and M >= m_inf and c > 0):
        raise ValueError(f"need M >= m_inf > 0 and c > 0, got M={M}, m_inf={m_inf}, c={c}")


def _certificate(theorem, problem: RateProblem, constants: dict) -> RateBound:
    lam, eps, eta = maximize(problem)
    if not lam > 0:
        raise NoCertificateError(f"{theorem.value}: constant chain admits no positive rate")
    equiv = equivalence_constants_1d if problem.dim == 1 else equivalence_constants_3d
    C1, C2 = equiv(problem.M, problem.m_inf, problem.C_R, eps)
    constants = dict(constants, C_R=problem.C_R, C1=C1, C2=C2, M=problem.M,
                     m_inf=problem.m_inf, c=problem.c)
    if problem.dim == 3:
        first = problem.A - eps * (problem.p / eta + 0.5 * problem.c)
        second = eps / 6.0 * (problem.c / 3.0 - eta * problem.q)
        constants["C"] = min(first, second)
    return RateBound(theorem, lam, C2 / C1, eps, eta, constants)


def decay_bound_1d_type3(delta, M, m_inf, c, model: InteractionModel) -> RateBound:
    """Certificate for positive data ``delta <= u, v <= M`` and a type-3 rate."""
    _check_common(M, m_inf, c)
    if not delta > 0:
        raise NoCertificateError("type-3 certificate needs a positive lower bound delta")
    kappa3, kappa4 = model.kappa_bounds((delta, M), dim=1)
    if not kappa3 > 0:
        raise NoCertificateError(f"kappa3 = {kappa3} on [{delta}, {M}]: no lower bound on the rate")
    C_R = elliptic_constant(1).value
    problem = problem_1d_type3(kappa3, kappa4, M, m_inf, c, C_R)
    return _certificate(Theorem.T1D_type3, problem,
                        {"kappa3": kappa3, "kappa4": kappa4, "delta": delta})


def decay_bound_1d_type1(alpha, M, m_inf, c, kappa1, k1_inf) -> RateBound:
    """Certificate for nonnegative data and ``k >= k1 (u+v)**alpha``, ``k <= kappa1``."""
    _check_common(M, m_inf, c)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not k1_inf > 0:
        raise NoCertificateError("type-1 certificate needs ess inf k1 > 0")
    C_R = elliptic_constant(1).value
    problem = problem_1d_type1(alpha, kappa1, k1_inf, M, m_inf, c, C_R)
    return _certificate(Theorem.T1D_type1, problem,
                        {"alpha": alpha, "kappa1": kappa1, "k1_inf": k1_inf})


def decay_bound_3d_type3(delta, M, m_inf, c, model: InteractionModel) -> RateBound:
    _check_common(M, m_inf, c)
    if not delta > 0:
        raise NoCertificateError("type-3 certificate needs a positive lower bound delta")
    kappa3, kappa4 = model.kappa_bounds((delta, M), dim=3)
    if not kappa3 > 0:
        raise NoCertificateError(f"kappa3 = {kappa3} on [{delta}, {M}]: no lower bound on the rate")
    C_R = elliptic_constant(3).value
    problem = problem_3d_type3(kappa3, kappa4, M, m_inf, c, C_R)
    assert problem.eta_max > 0
    return _certificate(Theorem.T3D_type3, problem,
                        {"kappa3": kappa3, "kappa4": kappa4, "delta": delta})


def decay_bound_3d_type1(alpha, M, m_inf, c, kappa1, k1_inf) -> RateBound:
    _check_common(M, m_inf, c)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not k1_inf > 0:
        raise NoCertificateError("type-1 certificate needs ess inf k1 > 0")
    C_R = elliptic_constant(3).value
    problem = problem_3d_type1(alpha, kappa1, k1_inf, M, m_inf, c, C_R)
    return _certificate(Theorem.T3D_type1, problem,
                        {"alpha": alpha, "kappa1": kappa1, "k1_inf": k1_inf})


def recompute_lambda(bound: RateBound) -> float:
    """Re-evaluate the defining min-formula at the certificate's optimum."""
    k = bound.constants
    C_R, M, m, c = k["C_R"], k["M"], k["m_inf"], k["c"]
    th = bound.theorem
    if th is Theorem.T1D_type3:
        p = problem_1d_type3(k["kappa3"], k["kappa4"], M, m, c, C_R)
    elif th is Theorem.T1D_type1:
        p = problem_1d_type1(k["alpha"], k["kappa1"], k["k1_inf"], M, m, c, C_R)
    elif th is Theorem.T3D_type3:
        p = problem_3d_type3(k["kappa3"], k["kappa4"], M, m, c, C_R)
    else:
        p = problem_3d_type1(k["alpha"], k["kappa1"], k["k1_inf"], M, m, c, C_R)
    return float(p.lam(bound.eps_star, bound.eta_star))


def certificates_for(model: InteractionModel, dim: int, m_inf: float, M: float,
                     delta: float, c: float, which: str = "auto") -> list[RateBound]:
    """Certificates applicable to a model and initial-data statistics.

    ``which`` is ``"auto"`` (type 3 when ``delta > 0``, else type 1), ``"all"``
    (every applicable one), or a theorem name.
    """
    flags = model.classify()
    floor = model.floor()

    def type3():
        f = decay_bound_1d_type3 if dim == 1 else decay_bound_3d_type3
        return f(delta, M, m_inf, c, model)

    def type1():
        if not flags.is_type1 or floor is None or not 0 <= floor[1] <= 1:
            raise NoCertificateError("model has no type-1 growth floor k >= k1 rho**alpha, alpha in [0, 1]")
        k1_inf, alpha = floor
        kappa1 = model.kappa_bounds((0.0, M), dim=dim)[1]
        f = decay_bound_1d_type1 if dim == 1 else decay_bound_3d_type1
        return f(alpha, M, m_inf, c, kappa1, k1_inf)

    names = {1: (Theorem.T1D_type3, Theorem.T1D_type1), 3: (Theorem.T3D_type3, Theorem.T3D_type1)}[dim]
    builders = {names[0]: type3, names[1]: type1}
    if which == "auto":
        if delta > 0 and flags.is_type3:
            return [type3()]
        return [type1()]
    if which == "all":
        out = []
        for build in builders.values():
            try:
                out.append(build())
            except NoCertificateError:
                pass
        if not out:
            raise NoCertificateError("no theorem applies to this model and data")
        return out
    th = Theorem(which)
    if th not in builders:
        raise ValueError(f"theorem {which} does not match dimension {dim}")
    return [builders[th]()]


# ---------------------------------------------------------------- empirical

def fit_empirical_rate(t, dist_sq=None, window=None) -> FitResult:
    """Least-squares line through ``(t, log dist_sq)``; ``lambda_emp = -slope/2``.

    ``t`` may be a TimeSeriesTable, in which case its columns are used.
    """
    if dist_sq is None:
        table = t
        t, dist_sq = table.column("t"), table.column("dist_sq")
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(dist_sq, dtype=np.float64)
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 3:
        raise ValueError(f"need at least 3 samples in window {window}, got {int(sel.sum())}")
    ts, ys = t[sel], y[sel]
    if np.any(ys <= 0):
        raise ValueError("dist_sq must be strictly positive on the fit window")
    logy = np.log(ys)
    slope, intercept = np.polyfit(ts, logy, 1)
    resid = logy - (slope * ts + intercept)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    lam = -0.5 * float(slope)
    if ss_tot == 0:
        lam = 0.0
    return FitResult(lam, (float(lo), float(hi)), r2, int(sel.sum()))


def certificate_ratio(t, dist_sq, bound: RateBound) -> float:
    """``max_t dist_sq(t) / (Lambda exp(-2 lam t) dist_sq(0))``; <= 1 means valid."""
    t = np.asarray(t, dtype=np.float64)
    d = np.asarray(dist_sq, dtype=np.float64)
    if d[0] == 0:
        return 0.0 if np.all(d == 0) else math.inf
    return float(np.max(d / bound.envelope(t, d[0])))
