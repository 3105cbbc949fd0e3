"""Scalar functionals of a field at given (sigma, c) and their first variations.

All quadratic terms come from :func:`artifact.spectral.sobolev_norms`; the
nonlinear term is the discrete integral of ``|u|^(2 sigma + 2)``.  Quotients
that are undefined for the zero field are reported as :data:`UNDEFINED`
(a NaN) rather than 0 or infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import RegimeError, UndefinedQuotientError
from .spectral import (FOURIER, PHYSICAL, Field, NormReport, lp_integral,
                       multiplier_norm2, sobolev_norms)

UNDEFINED = math.nan
_DENOM_GUARD = 1e-14

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


def is_undefined(value: float) -> bool:
    return isinstance(value, float) and math.isnan(value)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, nonlinearity exponent, frequency shift and mass."""

    dim: int
    sigma: float
    c: float = 0.0
    mass: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise RegimeError("dimension must be positive")
        if not self.sigma > 0:
            raise RegimeError("sigma must be positive")
        if self.dim >= 5 and not self.sigma < 4.0 / (self.dim - 4):
            raise RegimeError("sigma is energy-supercritical for this dimension")
        if not self.mass > 0:
            raise RegimeError("mass must be positive")

    @property
    def critical_sigma(self) -> float:
        return 4.0 / self.dim

    @property
    def regime(self) -> str:
        crit = self.critical_sigma
        if math.isclose(self.sigma, crit, rel_tol=1e-12):
            return CRITICAL
        return SUBCRITICAL if self.sigma < crit else SUPERCRITICAL

    @property
    def p(self) -> float:
        """Exponent ``2 sigma + 2`` of the nonlinear integral."""
        return 2.0 * self.sigma + 2.0

    @property
    def n_sigma(self) -> float:
        return self.dim * self.sigma

    def with_c(self, c: float) -> "ProblemParams":
        return ProblemParams(self.dim, self.sigma, c, self.mass)

    def with_mass(self, mass: float) -> "ProblemParams":
        return ProblemParams(self.dim, self.sigma, self.c, mass)


REPORT_KEYS = ("E", "Sc", "Tc", "Kc", "K", "D", "Nc", "Pc", "P1", "P2", "lambda",
               "c_of_u", "mass", "grad2", "bilap2", "shifted2", "lp")


@dataclass(frozen=True)
class FunctionalReport:
    E: float
    Sc: float
    Tc: float
    Kc: float
    K: float
    D: float
    Nc: float
    Pc: float
    P1: float
    P2: float
    norms: NormReport
    lp: float
    lam: float
    c_of_u: float
    Q_kappa: float
    gns_quotient: float
    H_quotient: float
    H_member: bool | None

    def as_flat_dict(self) -> dict[str, float | None]:
        flat = {
            "E": self.E, "Sc": self.Sc, "Tc": self.Tc, "Kc": self.Kc, "K": self.K,
            "D": self.D, "Nc": self.Nc, "Pc": self.Pc, "P1": self.P1, "P2": self.P2,
            "lambda": self.lam, "c_of_u": self.c_of_u, "mass": self.norms.mass,
            "grad2": self.norms.grad2, "bilap2": self.norms.bilap2,
            "shifted2": self.norms.shifted2, "lp": self.lp,
        }
        return {k: (None if is_undefined(v) else float(v)) for k, v in flat.items()}

    def to_json(self) -> str:
        return json.dumps(self.as_flat_dict(), sort_keys=False)


# -- building blocks ------------------------------------------------------------

def _pohozaev_coefficient(params: ProblemParams) -> float:
    ns = params.n_sigma
    return ns / (4.0 * (params.sigma + 1.0))


def virial_coefficient(dim: int, sigma: float) -> float:
    """``(N sigma / (4 (sigma + 1))) (N sigma / 2 - 1)``, the weight of the nonlinear term in D."""
    ns = dim * sigma
    return ns / (4.0 * (sigma + 1.0)) * (ns / 2.0 - 1.0)


def h_membership_threshold(dim: int, sigma: float) -> float:
    """Lower bound on the H-quotient that characterises the inflection condition."""
    ns = dim * sigma
    if ns <= 4:
        raise RegimeError("threshold defined only for N sigma > 4")
    return virial_coefficient(dim, sigma) * ((ns - 2.0) / (ns - 4.0)) ** (ns / 2.0 - 2.0)


def energy_from_norms(n: NormReport, lp: float, sigma: float) -> float:
    return n.bilap2 - 2.0 * n.grad2 - lp / (sigma + 1.0)


def functional_suite(field: Field, params: ProblemParams) -> FunctionalReport:
    """Every scalar functional of ``field`` at ``params``."""
    n = sobolev_norms(field)
    sig, c, dim = params.sigma, params.c, params.dim
    lp = lp_integral(field, params.p)
    ns = params.n_sigma
    a, b, m = n.bilap2, n.grad2, n.mass
    E = a - 2.0 * b - lp / (sig + 1.0)
    Sc = E + (1.0 + c) * m
    Tc = a - 2.0 * b + (1.0 + c) * m
    if c > -1.0:
        Kc = a - 2.0 / math.sqrt(1.0 + c) * b + m
    else:
        Kc = UNDEFINED
    K = a + m
    D = a - virial_coefficient(dim, sig) * lp
    Nc = Tc - lp
    Pc = ((dim - 4.0) / dim) * a - 2.0 * ((dim - 2.0) / dim) * b + (1.0 + c) * m - lp / (sig + 1.0)
    P1 = a - b - _pohozaev_coefficient(params) * lp
    ratio = 4.0 * (sig + 1.0) / ns
    P2 = (ratio - 1.0) * a - 2.0 * (ratio / 2.0 - 1.0) * b - (1.0 + c) * m
    if m > 0:
        lam = (a - 2.0 * b - lp) / m
        c_u = -lam - 1.0
    else:
        lam = c_u = UNDEFINED
    q_kappa = _safe(lambda: gn_quotient(field, 2.0, params.p, sig / (sig + 1.0)))
    gns = _safe(lambda: gns_quotient(field, sig))
    if ns > 4:
        hq = _safe(lambda: H_quotient(field, sig))
        member = None if is_undefined(hq) else bool(hq > h_membership_threshold(dim, sig))
    else:
        hq, member = UNDEFINED, None
    return FunctionalReport(E, Sc, Tc, Kc, K, D, Nc, Pc, P1, P2, n, lp, lam, c_u,
                            q_kappa, gns, hq, member)


def _safe(fn) -> float:
    try:
        return float(fn())
    except UndefinedQuotientError:
        return UNDEFINED


# -- quotients ----------------------------------------------------------------

def gn_quotient(field: Field, s: float, p: float, kappa: float) -> float:
    """``||u||_p / (||u||_2^kappa ||(|D|^s - 1) u||_2^(1 - kappa))``."""
    mass = sobolev_norms(field).mass
    shifted = multiplier_norm2(field, lambda r: r ** s - 1.0)
    denom = mass ** (kappa / 2.0) * shifted ** ((1.0 - kappa) / 2.0)
    if not denom > _DENOM_GUARD:
        raise UndefinedQuotientError("gn_quotient denominator vanishes")
    return (lp_integral(field, p) ** (1.0 / p)) / denom


def gns_quotient(field: Field, sigma: float) -> float:
    """Dilation-invariant Gagliardo-Nirenberg-Sobolev ratio."""
    n = sobolev_norms(field)
    dim = field.grid.dim
    q = dim * sigma / 2.0
    denom = n.bilap2 ** (q / 2.0) * n.mass ** ((2.0 + 2.0 * sigma - q) / 2.0)
    if not denom > _DENOM_GUARD:
        raise UndefinedQuotientError("gns_quotient of the zero field")
    return lp_integral(field, 2.0 * sigma + 2.0) / denom


def H_quotient(field: Field, sigma: float) -> float:
    """``||Lap u||^(N sigma - 2) / (||u||_(2 sigma + 2)^(2 sigma + 2) ||grad u||^(N sigma - 4))``."""
    n = sobolev_norms(field)
    ns = field.grid.dim * sigma
    lp = lp_integral(field, 2.0 * sigma + 2.0)
    denom = lp * n.grad2 ** ((ns - 4.0) / 2.0)
    if not (denom > _DENOM_GUARD and n.grad2 > _DENOM_GUARD):
        raise UndefinedQuotientError("H_quotient needs nonzero gradient and nonlinear terms")
    return n.bilap2 ** ((ns - 2.0) / 2.0) / denom


def factorized_energy_plus_mass(field: Field, sigma: float) -> float:
    """Right-hand side of ``E + m = ||(Lap + 1) u||^2 (1 - m^sigma Q^(2 sigma + 2) / (sigma + 1))``."""
    n = sobolev_norms(field)
    q = gn_quotient(field, 2.0, 2.0 * sigma + 2.0, sigma / (sigma + 1.0))
    return n.shifted2 * (1.0 - n.mass ** sigma * q ** (2.0 * sigma + 2.0) / (sigma + 1.0))


# -- first variation ----------------------------------------------------------

def linear_symbol(field: Field, c: float, energy_only: bool = False) -> np.ndarray:
    """Lattice symbol of ``Lap^2 + 2 Lap + (1 + c)`` (or without the mass term)."""
    r2 = field.grid.xi_squared(field.carrier)
    sym = r2 * r2 - 2.0 * r2
    if not energy_only:
        sym = sym + (1.0 + c)
    return sym


def euler_gradient(field: Field, params: ProblemParams, energy_only: bool = False) -> Field:
    """``Lap^2 u + 2 Lap u + (1 + c) u - |u|^(2 sigma) u`` in physical representation.

    With ``energy_only`` the ``(1 + c) u`` term is dropped, giving the
    gradient of E/2.
    """
    g = field.grid
    lin = Field(g, field.fourier * linear_symbol(field, params.c, energy_only), FOURIER,
                field.carrier)
    u = field.physical
    nonlin = np.abs(u) ** (2.0 * params.sigma) * u
    return Field(g, lin.physical - nonlin, PHYSICAL, field.carrier)


def inner(u: Field, v: Field) -> float:
    """Real part of the discrete L^2 inner product ``Re sum conj(u) v h^N``."""
    if u.carrier != v.carrier:
        raise ValueError("fields carry different carriers")
    return float(np.real(np.vdot(u.physical, v.physical)) * u.grid.cell_volume)


def lagrange_multiplier(field: Field, sigma: float) -> tuple[float, float]:
    """Nehari-quotient multiplier ``lambda`` and the induced frequency ``c = -lambda - 1``."""
    n = sobolev_norms(field)
    if not n.mass > _DENOM_GUARD:
        raise UndefinedQuotientError("multiplier undefined for the zero field")
    lp = lp_integral(field, 2.0 * sigma + 2.0)
    lam = (n.bilap2 - 2.0 * n.grad2 - lp) / n.mass
    return lam, -lam - 1.0


def energy(field: Field, sigma: float) -> float:
    n = sobolev_norms(field)
    return energy_from_norms(n, lp_integral(field, 2.0 * sigma + 2.0), sigma)
