"""Run a configured simulation, record diagnostics and check solver invariants."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .config import SimConfig, build_initial
from .errors import NoCertificateError, SimulationError
from .rates import RateBound, certificate_ratio, certificates_for
from .solver import KineticState, StateStats, init_state, strang_step

MASS_RTOL = 1e-12
BOUND_ATOL = 1e-12
H_RTOL = 1e-13
CERT_RTOL = 1e-6
CONVEX_POWERS = (2, 3, 4)


@dataclass
class RunReport:
    steps: int = 0
    mass0: float = math.nan
    max_mass_drift: float = 0.0
    min_value: float = math.inf
    max_value: float = -math.inf
    max_h_increase: float = 0.0      # largest H(n+1) - H(n) - tol, clipped at 0 when fine
    h_violations: int = 0
    convex_violations: int = 0
    runtime: float = 0.0
    certificate_error: Optional[str] = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class RunResult:
    config: SimConfig
    table: dg.TimeSeriesTable
    state: KineticState
    initial: KineticState
    stats: StateStats
    bounds: list[RateBound]
    eps: float
    report: RunReport
    model: object = None
    h_steps: list = field(default_factory=list)

    def checks(self) -> dict:
        """Named pass/fail verdicts for ``verify``."""
        r, s = self.report, self.stats
        out = {
            "mass": (r.max_mass_drift <= MASS_RTOL, f"relative drift {r.max_mass_drift:.3e}"),
            "max_principle": (
                r.min_value >= s.delta - BOUND_ATOL and r.max_value <= s.M + BOUND_ATOL,
                f"values in [{r.min_value!r}, {r.max_value!r}] vs [{s.delta!r}, {s.M!r}]",
            ),
            "entropy_monotone": (r.h_violations == 0, f"{r.h_violations} increasing steps"),
            "convex_monotone": (r.convex_violations == 0, f"{r.convex_violations} increasing steps"),
        }
        if not self.bounds:
            out["certificate"] = (False, r.certificate_error or "no certificate")
        t, d = self.table.column("t"), self.table.column("dist_sq")
        for b in self.bounds:
            ratio = certificate_ratio(t, d, b)
            out[f"certificate:{b.theorem.value}"] = (
                ratio <= 1 + CERT_RTOL, f"max dist_sq / envelope = {ratio:.6g}")
        return out

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks().values())


def initial_state(cfg: SimConfig) -> tuple[KineticState, StateStats]:
    return init_state(build_initial(cfg.initial, cfg.grid), cfg.c)


def _check_state(state: KineticState, step: int, M: float):
    if not np.all(np.isfinite(state.dev)):
        raise SimulationError(f"non-finite value at step {step}", step=step)
    low = float(state.dev.min()) + state.offset
    if low < -BOUND_ATOL * max(1.0, M):
        raise SimulationError(f"negative density {low!r} at step {step}", step=step)


def run(cfg: SimConfig, state: Optional[KineticState] = None, track_h: bool = False) -> RunResult:
    """Advance to ``t_end`` recording every ``record_every`` steps and at the end.

    A supplied ``state`` (from a checkpoint) replaces the preset initial data.
    """
    started = time.perf_counter()
    if state is None:
        state, stats = initial_state(cfg)
    else:
        sp = state.species
        stats = StateStats(state.offset, float(sp.max()), float(sp.min()))
    initial = state
    model = cfg.model.build()

    report = RunReport(mass0=dg.mass(state))
    try:
        bounds = certificates_for(model, cfg.dim, stats.m_inf, stats.M, stats.delta, cfg.c,
                                  cfg.theorem)
    except NoCertificateError as exc:
        bounds, report.certificate_error = [], str(exc)
    if cfg.eps_policy == "explicit":
        eps = cfg.eps
    else:
        eps = bounds[0].eps_star if bounds else 0.0
    primary = bounds[0] if bounds else None
    dist0 = dg.dist_sq(state)

    table = dg.TimeSeriesTable()
    table.append(dg.record(state, model, eps, primary, dist0))
    nsteps = cfg.nsteps
    sweeps = cfg.model.picard_sweeps
    H_prev = dg.entropy_H(state)
    convex_prev = [dg.convex_functional(state, p) for p in CONVEX_POWERS] if cfg.check_every_step else []
    h_steps = [H_prev] if track_h else []
    sp = state.species
    report.min_value, report.max_value = float(sp.min()), float(sp.max())

    for step in range(1, nsteps + 1):
        state = strang_step(state, cfg.dt, model, sweeps)
        _check_state(state, step, stats.M)
        H = m = None
        if cfg.check_every_step:
            report.min_value = min(report.min_value, float(state.dev.min()) + state.offset)
            report.max_value = max(report.max_value, float(state.dev.max()) + state.offset)
            m = dg.mass(state)
            drift = abs(m - report.mass0) / max(abs(report.mass0), 1e-300)
            report.max_mass_drift = max(report.max_mass_drift, drift)
            H = dg.entropy_H(state)
            excess = H - H_prev - H_RTOL * (1 + abs(H_prev))
            if excess > 0:
                report.h_violations += 1
                report.max_h_increase = max(report.max_h_increase, excess)
            H_prev = H
            for i, p in enumerate(CONVEX_POWERS):
                val = dg.convex_functional(state, p)
                if val > convex_prev[i] * (1 + H_RTOL):
                    report.convex_violations += 1
                convex_prev[i] = val
            if track_h:
                h_steps.append(H)
        if step % cfg.record_every == 0 or step == nsteps:
            table.append(dg.record(state, model, eps, primary, dist0, H=H, mass_value=m))
    if not cfg.check_every_step:
        # fall back on the recorded columns
        mass = table.column("mass")
        report.max_mass_drift = float(np.max(np.abs(mass - mass[0])) / abs(mass[0]))
        H = table.column("H")
        bad = np.diff(H) > H_RTOL * (1 + np.abs(H[:-1]))
        report.h_violations = int(bad.sum())
        sp = state.species
        report.min_value = min(report.min_value, float(sp.min()))
        report.max_value = max(report.max_value, float(sp.max()))
    report.steps = nsteps
    report.runtime = time.perf_counter() - started
    return RunResult(cfg, table, state, initial, stats, bounds, eps, report, model, h_steps)


@dataclass
class DissipationIdentity:
    dt: float
    residual: np.ndarray      # |dH/dt + D| / D per step
    dH: np.ndarray
    D: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0


def dissipation_identity(cfg: SimConfig, steps: Optional[int] = None,
                         min_D: float = 0.0) -> DissipationIdentity:
    """Compare the per-step entropy drop with the dissipation.

    ``D`` is evaluated at the post-relaxation state of each Strang step, so
    the discrepancy is first order in ``dt``.  Steps with ``D <= min_D`` are
    skipped.
    """
    state, _ = initial_state(cfg)
    model = cfg.model.build()
    nsteps = cfg.nsteps if steps is None else steps
    H_prev = dg.entropy_H(state)
    dH, D = [], []
    for _ in range(nsteps):
        state, mid = strang_step(state, cfg.dt, model, cfg.model.picard_sweeps, return_mid=True)
        H = dg.entropy_H(state)
        dH.append(H - H_prev)
        D.append(dg.entropy_dissipation(mid, model))
        H_prev = H
    dH, D = np.array(dH), np.array(D)
    keep = np.isfinite(D) & (D > min_D)
    res = np.abs(dH[keep] / cfg.dt + D[keep]) / D[keep]
    return DissipationIdentity(cfg.dt, res, dH, D)
