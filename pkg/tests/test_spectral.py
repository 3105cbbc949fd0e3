import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.spectral import (FOURIER, PHYSICAL, BoundaryTailWarning, Field, GridError,
                               annulus_bump, centroid, fiber_scale, fiber_scale_lp,
                               gauge_fix, gaussian_wave, knapp_cap, lp_integral, lp_norm,
                               make_grid, random_bandlimited, rescale, sobolev_norms,
                               transform, translate)
from artifact.functionals import energy

SQRT_PI = math.sqrt(math.pi)


def gaussian(grid):
    return Field.from_function(grid, lambda *xs: np.exp(-sum(x * x for x in xs) / 2.0))


@pytest.fixture(scope="module")
def line():
    return make_grid(1, 20.0, 1024)


# -- grids -----------------------------------------------------------------------

def test_grid_spacing(line):
    assert line.h == 0.0390625


def test_grid_node_count():
    assert make_grid(2, 10.0, 128).size == 16384


@pytest.mark.parametrize("dim,n,msg", [(1, 1000, "power of two"), (4, 64, "dim"), (1, 16, "at least 32")])
def test_grid_rejects_bad_shapes(dim, n, msg):
    with pytest.raises(GridError, match=msg):
        make_grid(dim, 20.0, n)


def test_grid_rejects_nonpositive_width():
    with pytest.raises(GridError):
        make_grid(1, 0.0, 64)


# -- transforms ------------------------------------------------------------------

def test_point_mass_transform_is_one(line):
    vals = np.zeros(line.n)
    vals[line.n // 2] = 1.0 / line.h
    f = transform(Field(line, vals, PHYSICAL), FOURIER)
    assert np.max(np.abs(f.fourier - 1.0)) < 1e-12


def test_gaussian_transform_matches_closed_form(line):
    f = gaussian(line)
    xi = line.xi
    expected = math.sqrt(2 * math.pi) * np.exp(-xi ** 2 / 2)
    assert np.max(np.abs(f.fourier - expected)) <= 1e-8


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2]))
def test_round_trip_inversion(seed, dim):
    g = make_grid(dim, 12.0, 64)
    rng = np.random.default_rng(seed)
    u = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape), PHYSICAL)
    back = transform(transform(u, FOURIER), PHYSICAL)
    assert np.max(np.abs(back.physical - u.physical)) <= 1e-12 * np.max(np.abs(u.physical))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3]))
def test_plancherel(seed, dim):
    g = make_grid(dim, 16.0, {1: 256, 2: 64, 3: 32}[dim])
    u = random_bandlimited(g, np.random.default_rng(seed))
    physical = float(np.sum(np.abs(u.physical) ** 2) * g.cell_volume)
    assert abs(sobolev_norms(u).mass - physical) <= 1e-10 * physical


# -- norms -----------------------------------------------------------------------

def test_zero_field_norms(line):
    n = sobolev_norms(Field.zeros(line))
    assert (n.mass, n.grad2, n.bilap2, n.shifted2) == (0.0, 0.0, 0.0, 0.0)
    assert lp_norm(Field.zeros(line), 3.0) == 0.0


def test_gaussian_moments(line):
    n = sobolev_norms(gaussian(line))
    for got, want in [(n.mass, SQRT_PI), (n.grad2, SQRT_PI / 2), (n.bilap2, 3 * SQRT_PI / 4),
                      (n.shifted2, 3 * SQRT_PI / 4)]:
        assert got == pytest.approx(want, abs=1e-8)


def test_gaussian_l4(line):
    assert lp_integral(gaussian(line), 4.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)


def test_l2_norm_agrees_with_fourier_mass(line):
    u = random_bandlimited(line, np.random.default_rng(3))
    assert lp_norm(u, 2.0) ** 2 == pytest.approx(sobolev_norms(u).mass, rel=1e-10)


def test_lp_rejects_small_exponent(line):
    with pytest.raises(ValueError):
        lp_norm(gaussian(line), 0.5)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2]))
def test_strict_interpolation_inequality(seed, dim):
    g = make_grid(dim, 16.0, 128 if dim == 1 else 64)
    u = random_bandlimited(g, np.random.default_rng(seed))
    n = sobolev_norms(u)
    assert n.grad2 < math.sqrt(n.bilap2 * n.mass)


# -- dilations -------------------------------------------------------------------

def test_rescale_identity(line):
    u = gaussian(line)
    assert np.allclose(rescale(u, 1.0, 1.0).physical, u.physical, atol=1e-14)


def test_rescale_bilaplacian_closed_form():
    g = make_grid(1, 40.0, 2048)
    v = rescale(gaussian(g), 2.0, 3.0)
    assert sobolev_norms(v).bilap2 == pytest.approx(SQRT_PI / 9, rel=1e-8)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.5, 2.0), st.sampled_from([1.0, 2.0]))
def test_scaling_laws(seed, a, b):
    g = make_grid(1, 32.0, 512)
    u = random_bandlimited(g, np.random.default_rng(seed), cutoff=1.0, width=2.0)
    v = rescale(u, a, b)
    nu, nv = sobolev_norms(u), sobolev_norms(v)
    assert nv.mass == pytest.approx(a * a * b * nu.mass, rel=1e-8)
    assert nv.grad2 == pytest.approx(a * a / b * nu.grad2, rel=1e-8)
    assert nv.bilap2 == pytest.approx(a * a / b ** 3 * nu.bilap2, rel=1e-8)
    assert lp_integral(v, 4.0) == pytest.approx(a ** 4 * b * lp_integral(u, 4.0), rel=1e-8)


def test_noninteger_dilation_of_gaussian():
    g = make_grid(1, 40.0, 1024)
    v = rescale(gaussian(g), 1.0, 1.7)
    assert sobolev_norms(v).mass == pytest.approx(1.7 * SQRT_PI, rel=1e-8)


def test_fiber_scale_identity_and_mass(line):
    u = gaussian(line)
    assert np.allclose(fiber_scale(u, 1.0).physical, u.physical, atol=1e-14)
    assert sobolev_norms(fiber_scale(u, 2.0)).mass == pytest.approx(SQRT_PI, rel=1e-8)


def test_fiber_scale_lp_preserves_norm(line):
    u = gaussian(line)
    v = fiber_scale_lp(u, 0.5, 1.0)
    assert lp_norm(v, 4.0) == pytest.approx(lp_norm(u, 4.0), rel=1e-8)


def test_fiber_energy_profile(line):
    u = gaussian(line)
    t = 0.5
    a, b, lp = 3 * SQRT_PI / 4, SQRT_PI / 2, math.sqrt(math.pi / 2)
    expected = t * t * a - 2 * t * b - t ** 0.5 * lp / 2
    assert energy(fiber_scale(u, t), 1.0) == pytest.approx(expected, abs=1e-7)


def test_boundary_tail_warning():
    g = make_grid(1, 10.0, 256)
    with pytest.warns(BoundaryTailWarning):
        rescale(gaussian(g), 1.0, 4.0)


def test_translate_and_gauge_fix(line):
    u = gaussian(line).scaled(1j)
    moved = translate(u, [1.5])
    assert centroid(moved)[0] == pytest.approx(1.5, abs=1e-10)
    fixed = gauge_fix(moved)
    assert np.max(np.abs(fixed.physical - gaussian(line).physical)) < 1e-10


# -- test-function families ------------------------------------------------------

@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_gaussian_wave_closed_forms(line, tau):
    u = gaussian_wave(tau, line)
    assert sobolev_norms(u).mass == pytest.approx(SQRT_PI * tau, rel=1e-7)
    for p in (4.0, 6.0):
        assert lp_integral(u, p) == pytest.approx(math.sqrt(2 * math.pi / p) * tau, rel=1e-7)


def test_gaussian_wave_examples(line):
    assert sobolev_norms(gaussian_wave(1.0, line)).mass == pytest.approx(1.772454, abs=1e-6)
    assert lp_integral(gaussian_wave(2.0, line), 6.0) == pytest.approx(2.046653, abs=1e-6)
    assert sobolev_norms(gaussian_wave(1.0, line)).shifted2 == pytest.approx(11 / 4 * SQRT_PI, rel=1e-8)


def test_gaussian_wave_carrier_matches_plain(line):
    plain, carried = gaussian_wave(1.0, line), gaussian_wave(1.0, line, carrier=True)
    assert sobolev_norms(carried).shifted2 == pytest.approx(sobolev_norms(plain).shifted2, rel=1e-10)


def test_gaussian_wave_rejects_bad_inputs(line):
    with pytest.raises(GridError):
        gaussian_wave(1.0, make_grid(2, 20.0, 64))
    with pytest.raises(GridError):
        gaussian_wave(10.0, line)


def test_knapp_cap_support_bounds():
    eps, delta = 0.05, 0.09
    g = make_grid(2, 300.0, 256)
    u = knapp_cap(eps, delta, g)
    n = sobolev_norms(u)
    assert n.shifted2 / n.mass <= (2 * eps + eps ** 2) ** 2
    # The lattice count and its continuum estimate agree within a factor of two.
    cap = 2 * eps * 2 * math.asin(math.sqrt(1 - (1 - delta ** 2) ** 2))
    assert 0.5 <= n.mass / (cap / (2 * math.pi) ** 2) <= 2.0


def test_knapp_cap_rejects_coarse_grid():
    with pytest.raises(GridError, match="under-resolved"):
        knapp_cap(0.05, 0.09, make_grid(2, 20.0, 64))
    with pytest.raises(GridError):
        knapp_cap(0.05, 0.09, make_grid(1, 300.0, 64))


def test_annulus_bump_energy_bound():
    g = make_grid(1, 400.0, 4096)
    u = annulus_bump(1.0, 0.1, g)
    n = sobolev_norms(u)
    assert n.mass == pytest.approx(1.0, rel=1e-10)
    assert energy(u, 1.0) <= -1.0 + 0.04
    assert n.bilap2 <= n.mass
    v = annulus_bump(2.0, 0.1, g)
    assert energy(v, 1.0) + 2.0 <= 4 * 0.1 ** 2 * 2.0
