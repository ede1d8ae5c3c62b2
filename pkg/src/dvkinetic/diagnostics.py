"""Scalar functionals of a kinetic state: mass, L2 distance to equilibrium,
Boltzmann entropy and its dissipation, convex functionals, and the modified
entropy ``E = H + eps * int j . grad(phi)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from . import poisson
from .fields import exact_sum
from .interaction import InteractionModel
from .solver import KineticState

CSV_COLUMNS = ("t", "mass", "dist_sq", "H", "D", "E", "bound_value")

# Taylor coefficients of (1+d) log(1+d) - d = sum_{n>=2} (-1)^n d^n / (n (n-1)).
_SERIES = np.array([(-1.0) ** n / (n * (n - 1)) for n in range(2, 19)])
_SERIES_RADIUS = 0.1


def relative_entropy_density(d: np.ndarray) -> np.ndarray:
    """``s log s - s + 1`` at ``s = 1 + d``, accurate to relative precision near ``d = 0``."""
    d = np.asarray(d, dtype=np.float64)
    out = np.empty_like(d)
    small = np.abs(d) < _SERIES_RADIUS
    ds = d[small]
    acc = np.zeros_like(ds)
    for coef in _SERIES[::-1]:
        acc = acc * ds + coef
    out[small] = acc * ds * ds
    s = 1.0 + d[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0) - s + 1.0
    out[~small] = big
    return out


def _log_ratio(a_dev, b_dev, offset):
    """``log(a/b)`` for species given as offsets; accurate when ``a`` is close to ``b``."""
    b = offset + b_dev
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log1p((a_dev - b_dev) / b)


def mass(state: KineticState) -> float:
    return state.ncomp * state.offset + state.grid.cell_volume * exact_sum(state.dev)


def dist_sq(state: KineticState, m_inf: float | None = None) -> float:
    """``sum over species of int (w - m_inf)**2``."""
    shift = 0.0 if m_inf is None else state.offset - m_inf
    return state.grid.cell_volume * exact_sum((state.dev + shift) ** 2)


def entropy_H(state: KineticState, m_inf: float | None = None) -> float:
    """Boltzmann entropy relative to the constant ``m_inf`` (0 log 0 := 0)."""
    m = state.offset if m_inf is None else m_inf
    if not m > 0:
        raise ValueError("m_inf must be positive")
    d = (state.dev + (state.offset - m)) / m
    return m * state.grid.cell_volume * exact_sum(relative_entropy_density(d))


def _pair_term(a_dev, b_dev, offset):
    """``(log a - log b)(a - b)`` with the continuous conventions at zero.

    Returns ``inf`` where exactly one of the pair vanishes and 0 where both do.
    """
    diff = a_dev - b_dev
    a = offset + a_dev
    b = offset + b_dev
    both_zero = (a <= 0) & (b <= 0)
    one_zero = ((a <= 0) | (b <= 0)) & ~both_zero
    with np.errstate(divide="ignore", invalid="ignore"):
        term = _log_ratio(a_dev, b_dev, offset) * diff
    term = np.where(both_zero, 0.0, term)
    return np.where(one_zero, np.inf, term)


def entropy_dissipation(state: KineticState, model: InteractionModel) -> float:
    """Entropy dissipation ``D = -dH/dt`` of the relaxation operator.

    1D: ``int k (log u - log v)(u - v)``.  3D: ``int k`` times the sum over
    the 15 unordered pairs of the six species, which equals half the sum over
    ordered pairs; in particular every ``(u_i, v_j)`` pair has weight 1.
    Returns ``inf`` when a species vanishes next to a positive partner.
    """
    k = model.rate(state.species)
    dev, off = state.dev, state.offset
    total = np.zeros(state.grid.shape)
    for a, b in combinations(range(state.ncomp), 2):
        total = total + _pair_term(dev[a], dev[b], off)
    if np.any(np.isinf(total) & (k > 0)):
        return math.inf
    integrand = np.where(k > 0, k * total, 0.0)
    return state.grid.cell_volume * exact_sum(integrand)


def quadratic_dissipation(state: KineticState) -> float:
    """Quadratic surrogate for the dissipation of possibly vanishing states.

    1D: ``int (u - v)**2``; the entropy then drops at least at rate
    ``(2M)**(alpha-1) * k1_inf`` times this.  3D: the bracket
    ``sum_{i!=j} [(u_i-u_j)**2 + (v_i-v_j)**2] + sum_{i,j} (u_i-v_j)**2``
    (ordered pairs), to be multiplied by ``(6M)**(alpha-1) * k1_inf / 2``.
    """
    dev = state.dev
    if state.dim == 1:
        return state.grid.cell_volume * exact_sum((dev[0] - dev[1]) ** 2)
    u, v = dev[:3], dev[3:]
    acc = np.zeros(state.grid.shape)
    for i in range(3):
        for j in range(3):
            if i != j:
                acc = acc + (u[i] - u[j]) ** 2 + (v[i] - v[j]) ** 2
            acc = acc + (u[i] - v[j]) ** 2
    return state.grid.cell_volume * exact_sum(acc)


def dissipation_floor(state: KineticState, k1_inf: float, alpha: float, M: float) -> float:
    """Lower bound on the entropy dissipation under ``k >= k1 * rho**alpha``."""
    q = quadratic_dissipation(state)
    if state.dim == 1:
        return (2 * M) ** (alpha - 1) * k1_inf * q
    return 0.5 * (6 * M) ** (alpha - 1) * k1_inf * q


def convex_functional(state: KineticState, p: float) -> float:
    """``sum over species of int w**p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    w = np.maximum(state.species, 0.0)
    return state.grid.cell_volume * exact_sum(w**p)


def poisson_datum(state: KineticState, m_inf: float | None = None) -> np.ndarray:
    """``rho - ncomp*m_inf`` computed from the offsets (no cancellation)."""
    shift = 0.0 if m_inf is None else state.ncomp * (state.offset - m_inf)
    return state.dev.sum(axis=0) + shift


def momentum_coupling(state: KineticState, m_inf: float | None = None) -> float:
    """``int j . grad(phi)`` with ``-Laplace(phi) = rho - ncomp*m_inf``."""
    sol = poisson.solve_zero_mean(poisson_datum(state, m_inf), state.grid)
    d = state.ncomp // 2
    acc = np.zeros(state.grid.shape)
    for i in range(d):
        acc = acc + (state.dev[i] - state.dev[i + d]) * sol.grad_phi[i].values
    return state.grid.cell_volume * exact_sum(acc)


def lyapunov_E(state: KineticState, m_inf: float | None = None, eps: float = 0.0,
               H: float | None = None) -> float:
    """``H + eps int j . grad(phi)``; pass ``H`` if it is already known."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if H is None:
        H = entropy_H(state, m_inf)
    if eps == 0:
        return H
    return H + eps * momentum_coupling(state, m_inf)


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    dist_sq: float
    H: float
    D: float
    E: float
    bound_value: float = math.nan

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def record(state: KineticState, model: InteractionModel, eps: float = 0.0,
           bound=None, dist0: float | None = None, H: float | None = None,
           mass_value: float | None = None) -> DiagnosticsRecord:
    """Diagnostics row; ``H`` and ``mass_value`` skip recomputation when given."""
    d2 = dist_sq(state)
    if H is None:
        H = entropy_H(state)
    bound_value = math.nan
    if bound is not None and dist0 is not None:
        bound_value = bound.Lambda * math.exp(-2 * bound.lam * state.t) * dist0
    return DiagnosticsRecord(
        t=state.t,
        mass=mass(state) if mass_value is None else mass_value,
        dist_sq=d2,
        H=H,
        D=entropy_dissipation(state, model),
        E=lyapunov_E(state, eps=eps, H=H),
        bound_value=bound_value,
    )


@dataclass
class TimeSeriesTable:
    rows: list[DiagnosticsRecord] = field(default_factory=list)

    def append(self, rec: DiagnosticsRecord):
        if self.rows and not rec.t > self.rows[-1].t:
            raise ValueError(f"time must increase strictly: {rec.t} after {self.rows[-1].t}")
        self.rows.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.row())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeriesTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        table = cls()
        for line in reader:
            if line:
                table.append(DiagnosticsRecord(*(float(x) for x in line)))
        return table

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]
