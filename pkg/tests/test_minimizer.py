import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from artifact.errors import RegimeError
from artifact.functionals import ProblemParams, functional_suite
from artifact.minimizer import (SolverOptions, critical_mass_kstar, decay_rate, fiber_gap_function,
                                fiber_roots, fiber_roots_from_coefficients, local_energy_floor,
                                local_multiplier_bound, minimize_A, minimize_Ac, minimize_global,
                                minimize_local, minimize_Tc, mu0_threshold, plan_grid)
from artifact.spectral import GridError, Field, make_grid, random_bandlimited, sobolev_norms

P11 = ProblemParams(1, 1.0)
# Reference values for N = 1, sigma = 1.
I_11 = 2.217702638741015
B_11 = 0.431968200768706


# -- fiber calculus ----------------------------------------------------------------

def test_fiber_no_roots_example():
    r = fiber_roots_from_coefficients(1.0, 1.0, 1.0, 4.0)
    assert r.t_infl == pytest.approx(math.sqrt(1 / 6), rel=1e-14)
    t = math.sqrt(1 / 6)
    assert r.slope_at_infl == pytest.approx(2 * t - 2 - 4 * t ** 3, rel=1e-14)
    assert round(r.slope_at_infl, 5) == -1.45567
    assert not r.exists and r.t1 is None and r.t2 is None


def test_fiber_quadratic_case_exact():
    r = fiber_roots_from_coefficients(1.0, 0.1, 0.01, 3.0)
    t1 = (2 - math.sqrt(3.976)) / 0.06
    t2 = (2 + math.sqrt(3.976)) / 0.06
    assert r.exists
    assert abs(r.t1 - t1) <= 1e-12 * t1
    assert abs(r.t2 - t2) <= 1e-12 * t2
    # Six-figure reference values.
    assert r.t1 == pytest.approx(0.100151, abs=5e-6) and r.t2 == pytest.approx(66.566515, abs=5e-6)


def test_fiber_rejects_subcritical():
    with pytest.raises(RegimeError):
        fiber_roots_from_coefficients(1.0, 0.1, 0.01, 2.0)
    g = make_grid(1, 10.0, 64)
    with pytest.raises(RegimeError):
        fiber_roots(Field.from_function(g, lambda x: np.exp(-x * x)), 4.0)


def test_gap_function_flat_at_one():
    q = 3.5
    d = 1e-4
    h = lambda s: float(fiber_gap_function(s, q))
    assert h(1.0) == pytest.approx(0.0, abs=1e-14)
    assert (h(1 + d) - h(1 - d)) / (2 * d) == pytest.approx(0.0, abs=1e-7)
    assert (h(1 + d) - 2 * h(1) + h(1 - d)) / d ** 2 == pytest.approx(0.0, abs=1e-5)
    s = np.linspace(1.01, 20, 400)
    hs = fiber_gap_function(s, q)
    assert np.all(np.diff(hs) > 0) and np.all(np.diff(hs, 2) > 0)


def _bisect(fn, lo, hi):
    flo = fn(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (fn(mid) > 0) == (flo > 0):
            lo, flo = mid, fn(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


@given(st.floats(0.1, 10.0), st.floats(0.01, 1.0), st.floats(1e-3, 1.0), st.sampled_from([5, 6, 7, 8]))
def test_fiber_roots_against_dense_grid(a, b_frac, cc, n_sigma):
    q = n_sigma / 2
    r = fiber_roots_from_coefficients(a, b_frac * a, cc, q)
    t = np.geomspace(r.t_infl * 1e-8, r.t_infl * 1e4, 200001)
    df = 2 * a * t - 2 * b_frac * a - q * cc * t ** (q - 1)
    idx = np.nonzero(np.diff(np.sign(df)) != 0)[0]
    if not r.exists:
        assert idx.size == 0
        return
    assert idx.size == 2
    roots = [_bisect(r.df, t[i], t[i + 1]) for i in idx]
    assert r.t1 == pytest.approx(roots[0], rel=1e-6)
    assert r.t2 == pytest.approx(roots[1], rel=1e-6)
    assert 0 < r.t1 < r.t_infl < r.t2
    scale = max(2 * a * r.t2, 2 * b_frac * a)
    assert abs(r.df(r.t1)) <= 1e-10 * scale and abs(r.df(r.t2)) <= 1e-10 * scale
    gap = r.f(r.t_infl) - r.f(r.t1)
    assert gap == pytest.approx(float(fiber_gap_function(r.t_infl / r.t1, q)) * r.t1 ** q * cc,
                                rel=1e-8)


def test_fiber_roots_of_field_use_norms():
    g = make_grid(1, 30.0, 512)
    u = Field.from_function(g, lambda x: 0.3 * np.exp(-x * x / 2))
    sigma = 6.0
    r = fiber_roots(u, sigma)
    n = sobolev_norms(u)
    lp = float(np.sum(np.abs(u.physical) ** 14) * g.h)
    ns = 6.0
    t_infl = (8 * (sigma + 1) * n.bilap2 / (ns * (ns - 2) * lp)) ** (2 / (ns - 4))
    assert r.t_infl == pytest.approx(t_infl, rel=1e-10)


# -- thresholds and grids ----------------------------------------------------------

def test_multiplier_bound_value():
    assert local_multiplier_bound(1, 6.0) == pytest.approx(-1 + 16 / 12 + 32 / 4, rel=1e-14)
    assert local_energy_floor(1, 6.0, 2.0) == pytest.approx(-16 / 12 * 2.0)


def test_critical_mass_formula():
    assert critical_mass_kstar(1, 1.0, B_11) == pytest.approx(2 / B_11, rel=1e-14)


def test_plan_grid_respects_node_cap():
    g = plan_grid(1, decay_rate(1.0))
    assert g.half_width >= 28.0 / decay_rate(1.0)
    with pytest.raises(GridError):
        plan_grid(3, 1e-3)


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(preconditioner="jacobi")
    with pytest.raises(ValueError):
        SolverOptions(random_starts=0, gaussian_start=False)


# -- frequency problems ------------------------------------------------------------

@pytest.fixture(scope="module")
def tc_one():
    return minimize_Tc(1.0, P11)


def test_tc_identities(tc_one):
    assert tc_one.converged
    for key in ("Nc", "Pc", "P1", "P2"):
        assert abs(tc_one.residuals[key]) <= 1e-4
    assert abs(tc_one.residuals["multiplier"]) <= 1e-4


def test_tc_ground_state_equalities(tc_one):
    t = tc_one.value
    v = tc_one.extra["ground_state"]
    rep = functional_suite(v, P11.with_c(1.0))
    assert rep.Sc == pytest.approx(0.5 * t ** 2, rel=1e-4)
    assert rep.Tc == pytest.approx(t ** 2, rel=1e-4)
    assert rep.lp == pytest.approx(t ** 2, rel=1e-4)


def test_mountain_pass_level(tc_one):
    v = tc_one.extra["ground_state"]
    rep = functional_suite(v, P11.with_c(1.0))
    res = optimize.minimize_scalar(lambda tau: -(tau * rep.Tc - tau ** 2 * rep.lp / 2),
                                   bounds=(0.01, 10.0), method="bounded")
    assert -res.fun == pytest.approx(rep.Sc, rel=1e-4)


def test_tc_rejects_nonpositive_c():
    with pytest.raises(RegimeError):
        minimize_Tc(0.0, P11)


@given(st.integers(0, 2 ** 32 - 1))
def test_monotone_descent(seed):
    g = make_grid(1, 40.0, 256)
    u0 = random_bandlimited(g, np.random.default_rng(seed), cutoff=1.5, width=4.0)
    opts = SolverOptions(max_iter=300, history_cap=300, tol_residual=1e-14)
    res = minimize_Tc(1.0, P11, g, opts, starts=[("random", u0.physical)])
    vals = np.array([v for _, v, _ in res.history])
    assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals[1:]))


@pytest.fixture(scope="module")
def optimizer():
    return minimize_A(P11)


def test_A_virial_and_constants(optimizer):
    assert optimizer.converged
    assert abs(optimizer.residuals["virial_bilap"]) <= 1e-4
    assert abs(optimizer.residuals["virial_mass"]) <= 1e-4
    assert optimizer.extra["C"] == pytest.approx(8 * 7 ** (-7 / 8), rel=1e-14)
    assert optimizer.value == pytest.approx(I_11, rel=1e-6)
    assert optimizer.extra["B"] == pytest.approx(B_11, rel=1e-6)


def test_Ac_sandwich(optimizer):
    c = 5.0
    kc = minimize_Ac(c, P11).value
    I = optimizer.value
    assert (1 - 1 / math.sqrt(1 + c)) * I * (1 - 1e-3) <= kc <= I * (1 + 1e-3)


# -- mass problems -----------------------------------------------------------------

@pytest.fixture(scope="module")
def ground_masses():
    return minimize_global(1.0, P11), minimize_global(2.0, P11)


def test_global_minimizer_strict_regime(ground_masses):
    r1, _ = ground_masses
    assert r1.converged and not r1.degenerate_flag
    assert r1.value < -1.0 and r1.multiplier > 0
    assert abs(r1.residuals["mass"]) <= 1e-10
    for key in ("Nc", "Pc", "P1", "P2"):
        assert abs(r1.residuals[key]) <= 1e-4


def test_multiplier_increases_with_mass(ground_masses):
    r1, r2 = ground_masses
    assert r1.multiplier < r2.multiplier


def test_global_regime_guards():
    with pytest.raises(RegimeError):
        minimize_global(1.0, ProblemParams(1, 6.0))
    with pytest.raises(RegimeError):
        minimize_global(1.0, ProblemParams(1, 4.0), grid=make_grid(1, 50.0, 512))
    with pytest.raises(RegimeError):
        minimize_global(5.0, ProblemParams(1, 4.0), grid=make_grid(1, 50.0, 512), k_star=4.0)


@pytest.mark.slow
def test_degenerate_below_threshold_mass():
    m0 = 2.79242491371307  # from the sigma = 3 estimate of M
    res = minimize_global(m0 / 2, ProblemParams(1, 3.0))
    assert res.degenerate_flag
    assert abs(res.value / (m0 / 2) + 1) <= 1e-4


@pytest.mark.slow
def test_local_minimizer_supercritical():
    params = ProblemParams(1, 6.0)
    mu0 = mu0_threshold(1, 6.0, 0.020147066)
    m = 0.5 * mu0
    res = minimize_local(m, params, mu0=mu0)
    fn = res.extra["fiber_norms"]
    ns = 6.0
    assert (ns - 2) / (ns - 4) * fn["mass"] > fn["grad2"] > (ns - 4) / (ns - 2) * fn["bilap2"]
    assert 0 < res.multiplier < local_multiplier_bound(1, 6.0)
    assert local_energy_floor(1, 6.0, m) <= res.value <= -m + 1e-6


def test_local_rejects_mass_above_mu0():
    with pytest.raises(RegimeError):
        minimize_local(3.0, ProblemParams(1, 6.0), grid=make_grid(1, 50.0, 512), mu0=1.9)
