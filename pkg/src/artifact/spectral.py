"""Periodic pseudo-spectral fields on the box [-L, L)^N.

A :class:`Field` samples a complex function on a uniform grid.  The Fourier
representation approximates the continuous transform
``u_hat(xi) = int exp(-i x.xi) u(x) dx`` on the lattice ``xi_k = pi k / L``,
so closed-form transforms can be compared entry by entry.

Fields may carry a plane-wave ``carrier`` vector ``k0``: the represented
function is then ``exp(i k0.x) * values``.  Moduli (and therefore every
L^p norm) are unaffected, while derivative symbols are evaluated at the
shifted frequency ``xi + k0``.  This lets narrow-band families such as
modulated Gaussians or thin Fourier caps live on coarse grids.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import signal

PHYSICAL = "physical"
FOURIER = "fourier"
_REPRESENTATIONS = (PHYSICAL, FOURIER)

# Outer shell used for the boundary-tail diagnostic: max_i |x_i| >= 0.9 L.
TAIL_SHELL = 0.9
TAIL_WARN = 1e-8


class GridError(ValueError):
    """Invalid grid parameters or an under-resolved construction."""


class BoundaryTailWarning(UserWarning):
    """A rescaled field carries non-negligible mass near the box boundary."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^N with ``n`` points per axis."""

    dim: int
    half_width: float
    n: int
    _cache: dict = dc_field(default_factory=dict, init=False, repr=False,
                            compare=False, hash=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise GridError("half_width must be positive and finite")
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)):
            raise GridError(f"n not a power of two: {self.n}")
        if self.n < 32:
            raise GridError(f"n must be at least 32, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def dxi(self) -> float:
        return math.pi / self.half_width

    @property
    def nyquist(self) -> float:
        return math.pi * self.n / (2.0 * self.half_width)

    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates along one axis, ``-L + j h``."""
        return -self.half_width + self.h * np.arange(self.n)

    @cached_property
    def xi(self) -> np.ndarray:
        """Lattice frequencies along one axis, in FFT order."""
        return self.dxi * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def _sign(self) -> np.ndarray:
        # exp(i L xi_k) = (-1)^k relates the DFT to the continuous transform.
        k = np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n)).astype(np.int64)
        return np.where(k % 2 == 0, 1.0, -1.0)

    def axis_view(self, arr: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.dim
        shape[axis] = self.n
        return arr.reshape(shape)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return [self.axis_view(self.x, i) for i in range(self.dim)]

    def sign_mesh(self) -> np.ndarray:
        key = ("sign",)
        if key not in self._cache:
            s = np.ones(self.shape)
            for i in range(self.dim):
                s = s * self.axis_view(self._sign, i)
            self._cache[key] = s
        return self._cache[key]

    def xi_squared(self, carrier: Sequence[float] | None = None) -> np.ndarray:
        """``|xi + k0|^2`` on the full lattice (cached per carrier)."""
        k0 = _carrier_tuple(carrier, self.dim)
        key = ("xi2", k0)
        if key not in self._cache:
            total = np.zeros(self.shape)
            for i in range(self.dim):
                total = total + self.axis_view((self.xi + k0[i]) ** 2, i)
            self._cache[key] = total
        return self._cache[key]

    def shell_mask(self) -> np.ndarray:
        key = ("shell",)
        if key not in self._cache:
            m = np.zeros(self.shape, dtype=bool)
            for i in range(self.dim):
                m = m | (np.abs(self.axis_view(self.x, i)) >= TAIL_SHELL * self.half_width)
            self._cache[key] = m
        return self._cache[key]

    def high_band_mask(self) -> np.ndarray:
        key = ("band",)
        if key not in self._cache:
            cut = (2.0 / 3.0) * self.nyquist
            m = np.zeros(self.shape, dtype=bool)
            for i in range(self.dim):
                m = m | (np.abs(self.axis_view(self.xi, i)) > cut)
            self._cache[key] = m
        return self._cache[key]


def make_grid(dim: int, half_width: float, points_per_axis: int) -> Grid:
    """Build a validated :class:`Grid`."""
    return Grid(dim, half_width, points_per_axis)


def _carrier_tuple(carrier, dim: int) -> tuple[float, ...]:
    if carrier is None:
        return (0.0,) * dim
    k0 = tuple(float(c) for c in np.atleast_1d(carrier))
    if len(k0) != dim:
        raise ValueError(f"carrier must have {dim} components")
    return k0


@dataclass(frozen=True, eq=False)
class NormReport:
    """Squared L^2 norms of u, grad u, Lap u and (Lap + 1) u."""

    mass: float
    grad2: float
    bilap2: float
    shifted2: float


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable sampled function with a physical or Fourier representation."""

    grid: Grid
    values: np.ndarray
    representation: str = PHYSICAL
    carrier: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.representation not in _REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size:
                vals = vals.reshape(self.grid.shape)
            else:
                raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "carrier", _carrier_tuple(self.carrier, self.grid.dim))

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., np.ndarray],
                      carrier: Sequence[float] | None = None) -> "Field":
        """Sample ``func(x1, ..., xN)`` on the grid nodes."""
        vals = np.broadcast_to(func(*grid.coords()), grid.shape)
        return cls(grid, vals, PHYSICAL, carrier)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape), PHYSICAL)

    def replace(self, values: np.ndarray, representation: str | None = None) -> "Field":
        return Field(self.grid, values, representation or self.representation, self.carrier)

    # -- representations ------------------------------------------------------
    @cached_property
    def physical(self) -> np.ndarray:
        if self.representation == PHYSICAL:
            return self.values
        g = self.grid
        out = sfft.ifftn(self.values * g.sign_mesh()) / g.cell_volume
        out.flags.writeable = False
        return out

    @cached_property
    def fourier(self) -> np.ndarray:
        if self.representation == FOURIER:
            return self.values
        g = self.grid
        out = sfft.fftn(self.values) * g.sign_mesh() * g.cell_volume
        out.flags.writeable = False
        return out

    def to(self, target: str) -> "Field":
        return transform(self, target)

    # -- diagnostics ----------------------------------------------------------
    @cached_property
    def tail_fraction(self) -> float:
        """Fraction of the mass lying in the outer shell of the box."""
        dens = np.abs(self.physical) ** 2
        total = dens.sum()
        if total == 0.0:
            return 0.0
        return float(dens[self.grid.shell_mask()].sum() / total)

    @cached_property
    def spectral_tail(self) -> float:
        """Fraction of the Fourier energy above two thirds of the Nyquist band."""
        dens = np.abs(self.fourier) ** 2
        total = dens.sum()
        if total == 0.0:
            return 0.0
        return float(dens[self.grid.high_band_mask()].sum() / total)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    # -- arithmetic (always returns a new field) ------------------------------
    def scaled(self, factor: complex) -> "Field":
        return self.replace(self.values * factor)


def transform(field: Field, target: str) -> Field:
    """Return ``field`` in the ``target`` representation."""
    if target not in _REPRESENTATIONS:
        raise ValueError(f"unknown representation {target!r}")
    if target == field.representation:
        return field
    vals = field.physical if target == PHYSICAL else field.fourier
    return Field(field.grid, vals, target, field.carrier)


def _plancherel_weight(grid: Grid) -> float:
    # (dxi)^N / (2 pi)^N = 1 / (2L)^N
    return (2.0 * grid.half_width) ** (-grid.dim)


def sobolev_norms(field: Field) -> NormReport:
    """Squared norms computed as Fourier lattice sums with the Plancherel factor."""
    g = field.grid
    dens = np.abs(field.fourier) ** 2
    r2 = g.xi_squared(field.carrier)
    w = _plancherel_weight(g)
    mass = float(dens.sum() * w)
    grad2 = float((r2 * dens).sum() * w)
    bilap2 = float((r2 * r2 * dens).sum() * w)
    shifted2 = float(((1.0 - r2) ** 2 * dens).sum() * w)
    return NormReport(mass, grad2, bilap2, shifted2)


def multiplier_norm2(field: Field, symbol: Callable[[np.ndarray], np.ndarray]) -> float:
    """``(2 pi)^-N sum |symbol(|xi|)|^2 |u_hat|^2 dxi^N`` for a radial symbol."""
    g = field.grid
    r = np.sqrt(g.xi_squared(field.carrier))
    dens = np.abs(field.fourier) ** 2
    return float((np.abs(symbol(r)) ** 2 * dens).sum() * _plancherel_weight(g))


def lp_integral(field: Field, p: float) -> float:
    """``sum |u|^p h^N``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.sum(np.abs(field.physical) ** p) * field.grid.cell_volume)


def lp_norm(field: Field, p: float) -> float:
    """Discrete L^p norm ``(sum |u|^p h^N)^(1/p)``."""
    return lp_integral(field, p) ** (1.0 / p)


def apply_symbol(field: Field, symbol: np.ndarray) -> Field:
    """Fourier multiplier with symbol values given on the lattice."""
    return Field(field.grid, field.fourier * symbol, FOURIER, field.carrier)


# -- dilations ---------------------------------------------------------------

def _dilate_axis(coef: np.ndarray, grid: Grid, b: float, axis: int) -> np.ndarray:
    """Fourier coefficients of ``w(x/b)`` along one axis, up to the factor b.

    ``coef`` holds lattice values of the continuous transform.  The band-limited
    (sinc) interpolant has transform ``w_hat(b xi)``; it is evaluated with a
    chirp-z transform of the physical samples and cut at the Nyquist band.
    """
    n, L, h = grid.n, grid.half_width, grid.h
    rb = round(b)
    if abs(b - rb) < 1e-14 and rb >= 1:
        # Lattice-compatible: b xi_k is again a lattice frequency.
        k = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)
        target = rb * k
        valid = (target >= -n // 2) & (target < n // 2)
        idx = np.mod(target, n)
        taken = np.take(coef, idx, axis=axis)
        mask = grid.axis_view(valid.astype(float), axis)
        return taken * mask
    samples = sfft.ifft(coef * grid.axis_view(grid._sign, axis), axis=axis) / h
    omega0 = -b * math.pi * n / (2.0 * L)
    step = b * math.pi / L
    out = signal.czt(samples, m=n, w=np.exp(-1j * h * step), a=np.exp(1j * h * omega0), axis=axis)
    omega = omega0 + step * np.arange(n)
    out = out * grid.axis_view(h * np.exp(1j * L * omega), axis)
    keep = np.abs(omega) <= grid.nyquist * (1 + 1e-12)
    out = out * grid.axis_view(keep.astype(float), axis)
    return sfft.ifftshift(out, axes=axis)


def rescale(field: Field, a: float, b: float, warn: bool = True) -> Field:
    """Return ``a * u(x / b)`` (same representation as the input)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    g = field.grid
    if b == 1.0:
        out = Field(g, field.fourier * a, FOURIER, field.carrier)
    else:
        coef = np.asarray(field.fourier)
        for axis in range(g.dim):
            coef = _dilate_axis(coef, g, b, axis) * b
        carrier = tuple(k / b for k in field.carrier)
        out = Field(g, coef * a, FOURIER, carrier)
    out = transform(out, field.representation)
    if warn and b != 1.0 and out.tail_fraction > TAIL_WARN:
        warnings.warn(f"rescaled field has boundary tail {out.tail_fraction:.2e}",
                      BoundaryTailWarning, stacklevel=2)
    return out


def fiber_scale(field: Field, t: float, warn: bool = True) -> Field:
    """Mass-preserving dilation ``t^(N/4) u(t^(1/2) x)``."""
    n = field.grid.dim
    return rescale(field, t ** (n / 4.0), t ** -0.5, warn=warn)


def fiber_scale_lp(field: Field, t: float, sigma: float, warn: bool = True) -> Field:
    """``L^(2 sigma + 2)``-preserving dilation ``t^(N/(2 sigma + 2)) u(t x)``."""
    n = field.grid.dim
    return rescale(field, t ** (n / (2.0 * sigma + 2.0)), 1.0 / t, warn=warn)


def translate(field: Field, shift: Sequence[float]) -> Field:
    """Exact spectral translation ``u(x - shift)``."""
    g = field.grid
    phase = np.ones(g.shape, dtype=complex)
    k0 = field.carrier
    for i, s in enumerate(np.atleast_1d(shift)):
        phase = phase * g.axis_view(np.exp(-1j * (g.xi + k0[i]) * s), i)
    out = Field(g, field.fourier * phase, FOURIER, k0)
    return transform(out, field.representation)


def centroid(field: Field) -> np.ndarray:
    """Circular mass centroid, one coordinate per axis."""
    g = field.grid
    dens = np.abs(field.physical) ** 2
    total = dens.sum()
    out = np.zeros(g.dim)
    if total == 0:
        return out
    theta = math.pi * (g.x + g.half_width) / g.half_width
    for i in range(g.dim):
        axes = tuple(j for j in range(g.dim) if j != i)
        marg = dens.sum(axis=axes) if axes else dens
        z = np.sum(marg * np.exp(1j * theta)) / total
        ang = math.atan2(z.imag, z.real)
        out[i] = ang * g.half_width / math.pi - g.half_width
        if out[i] < -g.half_width:
            out[i] += 2 * g.half_width
    return out


def gauge_fix(field: Field) -> Field:
    """Re-center on the mass centroid and make the value at the origin real positive."""
    c = centroid(field)
    moved = transform(translate(field, -c), PHYSICAL)
    g = field.grid
    origin = tuple(g.n // 2 for _ in range(g.dim))
    v0 = moved.physical[origin]
    if abs(v0) > 0:
        moved = moved.replace(moved.physical * (abs(v0) / v0))
    return moved


# -- test-function families ---------------------------------------------------

def gaussian_wave(tau: float, grid: Grid, carrier: bool = False) -> Field:
    """Modulated Gaussian ``exp(i x - x^2 / (2 tau^2))`` on a 1-D grid.

    With ``carrier=True`` the factor ``exp(i x)`` is held as a carrier and the
    stored values are the real envelope.
    """
    if grid.dim != 1:
        raise GridError("gaussian_wave requires a one-dimensional grid")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if grid.half_width ** 2 / (2.0 * tau ** 2) <= -math.log(1e-12):
        raise GridError("box too small for tau: boundary value exceeds 1e-12")
    x = grid.x
    env = np.exp(-x ** 2 / (2.0 * tau ** 2))
    if carrier:
        return Field(grid, env, PHYSICAL, (1.0,))
    return Field(grid, env * np.exp(1j * x), PHYSICAL)


def knapp_cap(eps: float, delta: float, grid: Grid, carrier: bool = True) -> Field:
    """Fourier indicator of a thin spherical cap around the north pole.

    Lattice modes with ``1 - eps < |xi| < 1 + eps`` and ``xi_N / |xi| > 1 - delta^2``
    get transform value 1.  With ``carrier=True`` the lattice is centred on
    the pole ``e_N`` so the grid only needs to resolve the cap itself.
    """
    if grid.dim < 2:
        raise GridError("knapp_cap requires N >= 2")
    if not (0 < delta < 0.1 and 0 < eps < 1):
        raise ValueError("need 0 < delta < 1/10 and 0 < eps < 1")
    if 2.0 * eps / grid.dxi < 8.0:
        raise GridError("under-resolved shell: fewer than 8 lattice planes across 2 eps")
    k0 = [0.0] * grid.dim
    if carrier:
        k0[-1] = 1.0
    lateral = math.sqrt(max(0.0, 1.0 - (1.0 - delta ** 2) ** 2)) * (1.0 + eps)
    need = max(lateral, delta ** 2 + eps) if carrier else 1.0 + eps
    if grid.nyquist <= need:
        raise GridError("lattice band does not cover the cap")
    r2 = grid.xi_squared(k0)
    r = np.sqrt(r2)
    xin = grid.axis_view(grid.xi + k0[-1], grid.dim - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.where(r > 0, xin / np.where(r > 0, r, 1.0), 0.0)
    mask = (r > 1.0 - eps) & (r < 1.0 + eps) & (cosang > 1.0 - delta ** 2)
    if not mask.any():
        raise GridError("cap contains no lattice points")
    out = Field(grid, mask.astype(float), FOURIER, tuple(k0))
    return transform(out, PHYSICAL)


def _smooth_bump(s: np.ndarray) -> np.ndarray:
    """C-infinity bump on (0, 1), zero elsewhere."""
    out = np.zeros_like(s, dtype=float)
    inside = (s > 0) & (s < 1)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def annulus_bump(mass: float, eps: float, grid: Grid) -> Field:
    """Smooth radial Fourier bump supported in ``1 - eps < |xi| < 1``, normalised to ``mass``."""
    if not (0 < eps < 0.5):
        raise ValueError("need 0 < eps < 1/2")
    if not mass > 0:
        raise ValueError("mass must be positive")
    if eps / grid.dxi < 8.0:
        raise GridError("under-resolved shell: fewer than 8 lattice points across eps")
    if grid.nyquist <= 1.0:
        raise GridError("lattice band does not reach |xi| = 1")
    r = np.sqrt(grid.xi_squared())
    coef = _smooth_bump((r - (1.0 - eps)) / eps)
    out = transform(Field(grid, coef, FOURIER), PHYSICAL)
    m = sobolev_norms(out).mass
    return out.scaled(math.sqrt(mass / m))


def random_bandlimited(grid: Grid, rng: np.random.Generator, cutoff: float = 2.0,
                       width: float | None = None, real: bool = False) -> Field:
    """Random smooth field: filtered complex noise under a Gaussian envelope."""
    noise = rng.standard_normal(grid.shape) + (0.0 if real else 1j * rng.standard_normal(grid.shape))
    filt = np.exp(-grid.xi_squared() / (2.0 * cutoff ** 2))
    smooth = sfft.ifftn(sfft.fftn(noise) * filt)
    if real:
        smooth = smooth.real
    w = width if width is not None else grid.half_width / 4.0
    env = np.ones(grid.shape)
    for c in grid.coords():
        env = env * np.exp(-c ** 2 / (2.0 * w ** 2))
    return Field(grid, smooth * env, PHYSICAL)


def embed(field: Field, grid: Grid) -> Field:
    """Zero-pad (or crop) a field onto a grid of the same spacing, keeping it centred."""
    src = field.grid
    if grid.dim != src.dim or not math.isclose(grid.h, src.h, rel_tol=1e-12):
        raise GridError("embed needs grids of equal dimension and spacing")
    vals = np.asarray(field.physical)
    out = np.zeros(grid.shape, dtype=complex)
    if grid.n >= src.n:
        off = (grid.n - src.n) // 2
        out[tuple(slice(off, off + src.n) for _ in range(grid.dim))] = vals
    else:
        off = (src.n - grid.n) // 2
        out[...] = vals[tuple(slice(off, off + grid.n) for _ in range(grid.dim))]
    return Field(grid, out, PHYSICAL, field.carrier)
