import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dvkinetic.diagnostics import DiagnosticsRecord, TimeSeriesTable
from dvkinetic.errors import AdmissibilityError, NoCertificateError
from dvkinetic.interaction import CarlemanRate, ConstantRate, PowerLawRate
from dvkinetic.poisson import elliptic_constant
from dvkinetic.rates import (RateBound, Theorem, certificate_ratio, certificates_for,
                             decay_bound_1d_type1, decay_bound_1d_type3, decay_bound_3d_type1,
                             decay_bound_3d_type3, equivalence_constants_1d,
                             equivalence_constants_3d, fit_empirical_rate, golden_section_max,
                             grid_oracle, maximize, problem_1d_type1, problem_1d_type3,
                             problem_3d_type1, problem_3d_type3, recompute_lambda)

C_R = math.sqrt(1 + (2 * math.pi) ** -2 + (2 * math.pi) ** -4)


def closed_form_1d(A, B, M, m, c):
    """Both branches of C1(eps)*min(eps c/2, A - B eps) are monotone, so the
    optimum is the branch crossing, clipped to the open window end."""
    eps_max = 1 / (4 * M * C_R)
    eps = min(A / (B + c / 2), eps_max)
    return m / (1 + 2 * eps * C_R * m) * eps * c / 2, eps


def test_equivalence_constants_examples():
    C1, C2 = equivalence_constants_1d(1.5, 1.0, 1.01288, 0.1)
    assert C1 == pytest.approx(1 / 1.202576, rel=1e-12)
    assert C1 == pytest.approx(0.83155, abs=5e-6)
    assert C2 == pytest.approx(3 / (1 - 0.607728), rel=1e-12)
    assert C2 == pytest.approx(7.647754619243791, rel=1e-14)
    C1, C2 = equivalence_constants_1d(1.5, 1.0, C_R, 1e-15)
    assert C1 == pytest.approx(1.0) and C2 == pytest.approx(3.0)
    with pytest.raises(AdmissibilityError):
        equivalence_constants_1d(1.5, 1.0, C_R, 1 / (4 * 1.5 * C_R))
    with pytest.raises(AdmissibilityError):
        equivalence_constants_1d(1.5, 1.0, C_R, 0.0)
    with pytest.raises(AdmissibilityError):
        equivalence_constants_3d(1.5, 1.0, C_R, 1 / (4 * math.sqrt(3) * 1.5 * C_R))


# Regression targets.  1D values come from the closed form above, 3D values
# from the dense grid oracle (300 x 300 start, zoomed), frozen here.
FROZEN_3D = {
    "type3": 0.0007557549270181874,   # kappa3 = kappa4 = 1, M = 1.4, m = 1, c = 1
    "type1": 2.0473726307251628e-05,  # alpha = 1, kappa1 = 8.4, k1 = 1, M = 1.4
}


def test_goldstein_taylor_type3():
    b = decay_bound_1d_type3(0.5, 1.5, 1.0, 1.0, ConstantRate(1.0))
    lam, eps = closed_form_1d(1 / 1.5, 1 / (2 * 1.0) * C_R**2 + 1.0, 1.5, 1.0, 1.0)
    assert lam == pytest.approx(3 / (32 * 1.5 * C_R), rel=1e-15)
    assert b.lam == pytest.approx(0.06170385248015935, rel=1e-8)
    assert b.lam == pytest.approx(lam, rel=1e-8)
    assert b.eps_star < 1 / (4 * 1.5 * C_R)
    assert b.theorem is Theorem.T1D_type3 and b.eta_star is None
    assert b.Lambda == pytest.approx(b.constants["C2"] / b.constants["C1"])


@pytest.mark.parametrize("model,expected", [
    (CarlemanRate(), 0.04463840964958138),
    (PowerLawRate(1.0, -1.0), 0.04510908263359756),
])
def test_other_type3_rates(model, expected):
    b = decay_bound_1d_type3(0.5, 1.5, 1.0, 1.0, model)
    k3, k4 = model.kappa_bounds((0.5, 1.5))
    lam, eps = closed_form_1d(k3 / 1.5, k4**2 * C_R**2 / 2 + 1.0, 1.5, 1.0, 1.0)
    assert lam == pytest.approx(expected, rel=1e-14)
    assert b.lam == pytest.approx(lam, rel=1e-8)
    assert b.eps_star == pytest.approx(eps, rel=1e-6)


def test_type1_carleman_touching_data():
    b = decay_bound_1d_type1(1.0, 2.0, 1.0, 1.0, 4.0, 1.0)
    lam, _ = closed_form_1d(1.0, 4.0 * C_R**2 / 2 + 1.0, 2.0, 1.0, 1.0)
    assert b.lam == pytest.approx(lam, rel=1e-8)
    assert b.lam == pytest.approx(0.04936308198412709, rel=1e-8)


def test_type1_first_branch():
    p = problem_1d_type1(0.0, 1.0, 1.0, 1.5, 1.0, 1.0, C_R)
    assert p.A == pytest.approx(1 / 3)
    for M in (1.0, 2.0, 7.0):
        assert problem_1d_type1(1.0, 1.0, 2.5, M, 1.0, 1.0, C_R).A == 2.5
        assert problem_3d_type1(1.0, 1.0, 2.5, M, 1.0, 1.0, C_R).A == 1.25


def test_3d_regressions():
    b3 = decay_bound_3d_type3(0.6, 1.4, 1.0, 1.0, ConstantRate(1.0))
    assert b3.lam == pytest.approx(FROZEN_3D["type3"], rel=1e-8)
    b1 = decay_bound_3d_type1(1.0, 1.4, 1.0, 1.0, 8.4, 1.0)
    assert b1.lam == pytest.approx(FROZEN_3D["type1"], rel=1e-8)
    for b in (b3, b1):
        assert 0 < b.eta_star < 1 / (C_R + 9 * b.constants.get("kappa4", b.constants.get("kappa1")) * C_R)
        assert 0 < b.eps_star < 1 / (4 * math.sqrt(3) * 1.4 * C_R)
        assert b.lam == pytest.approx(3 * b.constants["C"] * b.constants["C1"], rel=1e-12)


def test_eta_window():
    for k4 in (0.1, 1.0, 10.0):
        p = problem_3d_type3(1.0, k4, 1.5, 1.0, 2.0, C_R)
        assert p.eta_max == pytest.approx(2.0 / (2.0 * C_R + 9 * k4 * C_R))
        assert p.eta_max > 0
        assert float(p.lam(0.01, p.eta_max)) <= 0


def test_no_certificate():
    with pytest.raises(NoCertificateError):
        decay_bound_1d_type3(0.5, 1.5, 1.0, 1.0, ConstantRate(0.0))
    with pytest.raises(NoCertificateError):
        decay_bound_3d_type3(0.5, 1.5, 1.0, 1.0, ConstantRate(0.0))
    with pytest.raises(NoCertificateError):
        decay_bound_1d_type1(0.5, 1.5, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(NoCertificateError):
        decay_bound_1d_type3(0.0, 1.5, 1.0, 1.0, ConstantRate(1.0))
    with pytest.raises(ValueError):
        decay_bound_1d_type1(1.5, 1.5, 1.0, 1.0, 1.0, 1.0)


def test_certificates_for_modes():
    both = certificates_for(CarlemanRate(), 1, 1.0, 1.5, 0.5, 1.0, "all")
    assert [b.theorem for b in both] == [Theorem.T1D_type3, Theorem.T1D_type1]
    auto = certificates_for(CarlemanRate(), 1, 1.0, 1.5, 0.0, 1.0, "auto")
    assert auto[0].theorem is Theorem.T1D_type1
    only2 = certificates_for(PowerLawRate(1.0, -1.0), 1, 1.0, 1.5, 0.5, 1.0, "all")
    assert [b.theorem for b in only2] == [Theorem.T1D_type3]
    with pytest.raises(ValueError):
        certificates_for(CarlemanRate(), 1, 1.0, 1.5, 0.5, 1.0, "T3D_type3")
    with pytest.raises(NoCertificateError):
        certificates_for(PowerLawRate(1.0, -1.0), 1, 1.0, 1.5, 0.0, 1.0, "auto")


def test_json_roundtrip():
    b = decay_bound_3d_type3(0.6, 1.4, 1.0, 1.0, CarlemanRate())
    d = json.loads(b.to_json())
    assert d["schema_version"] == 1
    assert set(d) == {"schema_version", "theorem", "lambda", "Lambda", "eps_star", "eta_star", "constants"}
    back = RateBound.from_dict(d)
    assert back.lam == b.lam and back.theorem is b.theorem
    with pytest.raises(ValueError):
        RateBound.from_dict({**d, "schema_version": 99})


def test_golden_section_basic():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert abs(x - 0.3) < 1e-9
    x, fx = golden_section_max(lambda t: t, 0.0, 1.0)
    assert 1 - 1e-10 < x < 1


one_d = st.tuples(st.floats(0.2, 2.0), st.floats(1.0, 4.0), st.floats(0.3, 3.0),
                  st.floats(0.05, 2.0), st.floats(1.0, 5.0))


@settings(max_examples=80, deadline=None)
@given(one_d)
def test_1d_type3_properties(params):
    m, ratio, c, k3, kr = params
    M, k4 = m * ratio, k3 * kr
    p = problem_1d_type3(k3, k4, M, m, c, C_R)
    lam, eps, _ = maximize(p)
    exact, _ = closed_form_1d(k3 / M, k4**2 * C_R**2 / (2 * c) + c, M, m, c)
    assert lam == pytest.approx(exact, rel=1e-8)
    # doubling kappa3 never lowers the certified rate
    lam2, _, _ = maximize(problem_1d_type3(2 * k3, k4 if k4 >= 2 * k3 else 2 * k3, M, m, c, C_R))
    if k4 >= 2 * k3:
        assert lam2 >= lam * (1 - 1e-12)
    C1, C2 = equivalence_constants_1d(M, m, C_R, eps)
    assert C2 / C1 >= 2 * M / m >= 2


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(1.0, 3.0), st.floats(0.5, 2.0), st.floats(0.05, 1.5),
       st.floats(1.0, 4.0), st.floats(0, 1), st.floats(0.1, 2.0))
def test_3d_monotone_and_defining_identity(m, ratio, c, k3, kr, alpha, k1):
    M = m * ratio
    b = decay_bound_3d_type1(alpha, M, m, c, k3 * kr, k1)
    b2 = decay_bound_3d_type1(alpha, M, m, c, k3 * kr, 2 * k1)
    assert b2.lam >= b.lam * (1 - 1e-9)
    assert abs(recompute_lambda(b) - b.lam) <= 1e-12 * b.lam
    assert b.Lambda >= 2 * M / m


def test_kappa3_to_zero():
    lams = [maximize(problem_1d_type3(k3, 1.0, 1.5, 1.0, 1.0, C_R))[0] for k3 in (1e-2, 1e-4, 1e-6)]
    assert lams[0] > lams[1] > lams[2] and lams[2] < 1e-6
    lams = [maximize(problem_3d_type3(k3, 1.0, 1.5, 1.0, 1.0, C_R))[0] for k3 in (1e-2, 1e-4)]
    assert lams[1] < lams[0] * 0.02


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(1.0, 3.0), st.floats(0.5, 2.0), st.floats(0.05, 1.5), st.floats(1.0, 4.0))
def test_grid_oracle_agreement(m, ratio, c, k3, kr):
    p = problem_3d_type3(k3, k3 * kr, m * ratio, m, c, C_R)
    assert maximize(p)[0] == pytest.approx(grid_oracle(p)[0], rel=1e-6)


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 51)
    fit = fit_empirical_rate(t, np.exp(-4 * t))
    assert abs(fit.lambda_emp - 2.0) < 1e-10
    assert fit.r_squared == pytest.approx(1.0)
    fit = fit_empirical_rate(t, np.full_like(t, 0.3))
    assert fit.lambda_emp == 0.0 and fit.r_squared == 1.0


def test_fit_noisy_exponential():
    t = np.linspace(0, 20, 401)
    fit = fit_empirical_rate(t, np.exp(-4 * t) * (1 + 0.01 * np.sin(t)))
    assert abs(fit.lambda_emp - 2.0) < 0.02
    assert fit.r_squared > 0.999


def test_fit_window_and_errors():
    table = TimeSeriesTable()
    for t in np.linspace(0, 4, 9):
        table.append(DiagnosticsRecord(float(t), 2.0, math.exp(-2 * t), 0.0, 0.0, 0.0))
    fit = fit_empirical_rate(table, window=(1.0, 3.0))
    assert fit.lambda_emp == pytest.approx(1.0, rel=1e-12)
    assert fit.samples == 5 and fit.window == (1.0, 3.0)
    with pytest.raises(ValueError):
        fit_empirical_rate(table, window=(1.0, 1.5))
    with pytest.raises(ValueError):
        fit_empirical_rate([0, 1, 2], [1.0, 0.0, 1.0])


def test_certificate_ratio():
    b = RateBound(Theorem.T1D_type3, 0.5, 2.0, 0.1, None, {})
    t = np.array([0.0, 1.0])
    assert certificate_ratio(t, [1.0, 2 * math.exp(-1)], b) == pytest.approx(1.0)
    assert certificate_ratio(t, [0.0, 0.0], b) == 0.0
