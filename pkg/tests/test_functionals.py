import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from artifact.errors import RegimeError, UndefinedQuotientError
from artifact.functionals import (REPORT_KEYS, ProblemParams, energy, euler_gradient,
                                  factorized_energy_plus_mass, functional_suite, gn_quotient,
                                  gns_quotient, H_quotient, h_membership_threshold, inner,
                                  is_undefined, lagrange_multiplier)
from artifact.minimizer import fiber_roots, mu0_threshold
from artifact.spectral import (Field, fiber_scale, gaussian_wave, make_grid,
                               random_bandlimited, rescale, sobolev_norms)

SQRT_PI = math.sqrt(math.pi)
# Closed-form moments of exp(-x^2/2): bilaplacian, mass, L^4 integral.
G_BILAP, G_MASS, G_L4 = 3 * SQRT_PI / 4, SQRT_PI, math.sqrt(math.pi / 2)


@pytest.fixture(scope="module")
def line():
    return make_grid(1, 20.0, 1024)


@pytest.fixture(scope="module")
def gauss(line):
    return Field.from_function(line, lambda x: np.exp(-x * x / 2))


def random_field(seed, dim=1, scale=1.0):
    g = make_grid(dim, 16.0, 256 if dim == 1 else 64)
    return random_bandlimited(g, np.random.default_rng(seed)).scaled(scale)


def test_problem_params_guards():
    with pytest.raises(RegimeError):
        ProblemParams(1, 0.0)
    with pytest.raises(RegimeError):
        ProblemParams(5, 4.0)
    p = ProblemParams(1, 4.0)
    assert p.regime == "critical" and p.p == 10.0
    assert ProblemParams(1, 6.0).regime == "supercritical"


def test_zero_field_report(line):
    rep = functional_suite(Field.zeros(line), ProblemParams(1, 1.0, c=0.5))
    flat = rep.as_flat_dict()
    for key in ("E", "Sc", "Tc", "Nc", "Pc", "P1", "P2", "D", "mass"):
        assert flat[key] == 0.0
    assert flat["lambda"] is None and flat["c_of_u"] is None
    assert is_undefined(rep.Q_kappa) and is_undefined(rep.gns_quotient)
    with pytest.raises(UndefinedQuotientError):
        gn_quotient(Field.zeros(line), 2.0, 4.0, 0.5)
    with pytest.raises(UndefinedQuotientError):
        lagrange_multiplier(Field.zeros(line), 1.0)


def test_report_json_keys(gauss):
    text = functional_suite(gauss, ProblemParams(1, 1.0, c=1.0)).to_json()
    assert list(json.loads(text)) == list(REPORT_KEYS)


def test_gaussian_energy(gauss):
    assert energy(gauss, 1.0) == pytest.approx(-1.069771, abs=1e-6)
    assert energy(gauss, 1.0) == pytest.approx(G_BILAP - G_MASS - G_L4 / 2, abs=1e-10)


def test_gaussian_multiplier(gauss):
    # Closed form: (3/4 - 1 - 1/sqrt(2) * 1) with the sqrt(pi) factors cancelled.
    lam, c = lagrange_multiplier(gauss, 1.0)
    assert lam == pytest.approx(-0.25 - 1 / math.sqrt(2), abs=1e-10)
    assert lam == pytest.approx(-0.957107, abs=1e-6)
    assert c == pytest.approx(-lam - 1, abs=1e-15)


def test_gn_quotient_modulated_gaussian(line):
    u = gaussian_wave(1.0, line)
    expected = (math.pi / 2) ** (1 / 8) / (math.pi ** (1 / 8) * (11 / 4 * SQRT_PI) ** (1 / 4))
    assert gn_quotient(u, 2.0, 4.0, 0.5) == pytest.approx(expected, rel=1e-5)
    assert expected == pytest.approx(0.6171551, abs=1e-7)


def test_gn_quotient_phase_invariant(line):
    u = gaussian_wave(1.3, line)
    assert gn_quotient(u.scaled(np.exp(0.7j)), 2.0, 6.0, 0.6) == gn_quotient(u, 2.0, 6.0, 0.6)


def test_gns_quotient_gaussian(gauss):
    expected = G_L4 / (G_BILAP ** 0.25 * G_MASS ** 1.75)
    assert gns_quotient(gauss, 1.0) == pytest.approx(expected, rel=1e-6)


def test_gns_dilation_invariance():
    g = make_grid(1, 40.0, 2048)
    u = Field.from_function(g, lambda x: np.exp(-x * x / 2))
    v = rescale(u, 3.0, 0.5)
    assert gns_quotient(v, 1.0) == pytest.approx(gns_quotient(u, 1.0), rel=1e-8)


def test_h_threshold_value():
    assert h_membership_threshold(1, 6.0) == pytest.approx(6 / 7, rel=1e-14)
    with pytest.raises(RegimeError):
        h_membership_threshold(1, 3.0)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 1.0))
def test_membership_below_mu0(seed, frac):
    mu0 = mu0_threshold(1, 6.0, 0.020147066)
    u = random_field(seed)
    u = u.scaled(math.sqrt(frac * mu0 / sobolev_norms(u).mass))
    rep = functional_suite(u, ProblemParams(1, 6.0))
    assert rep.H_member is True


@given(st.integers(0, 2 ** 32 - 1), st.floats(-3.0, 3.0))
def test_membership_matches_fiber_roots(seed, log_mass):
    u = random_field(seed)
    u = u.scaled(math.exp(log_mass / 2) / math.sqrt(sobolev_norms(u).mass))
    rep = functional_suite(u, ProblemParams(1, 6.0))
    assume(rep.H_member is not None)  # undefined below the denominator guard
    roots = fiber_roots(u, 6.0)
    if abs(roots.slope_at_infl) > 1e-9 * roots.a * roots.t_infl:
        assert rep.H_member == roots.exists


@pytest.mark.parametrize("t_factor", [0.5, 0.9, 1.1, 2.0])
def test_virial_sign_tracks_inflection(t_factor):
    g = make_grid(1, 60.0, 2048)
    u = Field.from_function(g, lambda x: np.exp(-x * x / 2))
    t = t_factor * fiber_roots(u, 6.0).t_infl
    D = functional_suite(fiber_scale(u, t), ProblemParams(1, 6.0)).D
    assert (D > 0) == (t_factor < 1)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2]), st.floats(0.3, 3.0),
       st.floats(0.01, 10.0), st.floats(0.2, 3.0))
def test_identity_web(seed, dim, sigma, c, scale):
    u = random_field(seed, dim, scale)
    r = functional_suite(u, ProblemParams(dim, sigma, c=c))
    m = r.norms.mass
    ref = max(abs(r.Tc), r.lp, m)
    assert abs(r.Sc - (r.E + (1 + c) * m)) <= 1e-10 * ref
    assert abs(r.P1 - dim / 4 * (r.Nc - r.Pc)) <= 1e-10 * ref
    assert abs(r.P2 - (r.Nc / sigma - (sigma + 1) * r.Pc / sigma)) <= 1e-10 * ref


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.5, 3.0), st.floats(0.1, 3.0))
def test_factorization(seed, sigma, scale):
    u = random_field(seed, 1, scale)
    lhs = energy(u, sigma) + sobolev_norms(u).mass
    assert factorized_energy_plus_mass(u, sigma) == pytest.approx(lhs, rel=1e-10, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.0, 0.3]))
def test_plancherel_form_positive(seed, eps):
    n = sobolev_norms(random_field(seed))
    assert (1 - eps) * n.bilap2 - 2 * n.grad2 + n.mass / (1 - eps) >= -1e-12 * n.mass


def test_euler_gradient_zero(line):
    g = euler_gradient(Field.zeros(line), ProblemParams(1, 1.0, c=1.0))
    assert np.all(g.physical == 0)


@pytest.mark.parametrize("energy_only", [False, True])
def test_euler_gradient_directional_derivative(energy_only):
    params = ProblemParams(1, 1.5, c=0.7)
    u = random_field(11, 1, 1.2)
    v = random_field(12, 1, 0.8)
    grad = euler_gradient(u, params, energy_only=energy_only)
    eps = 1e-5
    key = "E" if energy_only else "Sc"

    def value(w):
        return getattr(functional_suite(w, params), key)

    fd = (value(Field(u.grid, u.physical + eps * v.physical))
          - value(Field(u.grid, u.physical - eps * v.physical))) / (2 * eps)
    assert fd == pytest.approx(2 * inner(grad, v), rel=1e-5)


def test_inner_rejects_mixed_carriers(line):
    with pytest.raises(ValueError):
        inner(gaussian_wave(1.0, line), gaussian_wave(1.0, line, carrier=True))
