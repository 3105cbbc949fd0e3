"""Parameter sweeps over mass and frequency, with validation of the curves.

Every point of a sweep is solved independently (automatic grid per point),
failures are recorded as per-point flag bits rather than aborting the scan,
and the assembled curve is validated in one sequential pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache, partial
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .errors import ArtifactError, RegimeError
from .functionals import ProblemParams, functional_suite
from .inequality import BOUNDED, classify_sigma, estimate_M
from .minimizer import (MinimizerResult, SolverOptions, _best_constant_C, critical_mass_kstar,
                        grid_for_A, local_energy_floor, local_multiplier_bound, minimize_A,
                        minimize_global, minimize_local, minimize_Tc, mu0_threshold)
from .spectral import (Field, embed, gauge_fix, lp_norm, make_grid, rescale,
                       sobolev_norms)
from .functionals import gns_quotient

# Per-point flag bits.
POINT_FAILED = 1
POINT_NOT_CONVERGED = 2
POINT_DEGENERATE = 4
POINT_THRESHOLD_UNCERTAIN = 8
POINT_NOT_MEMBER = 16
POINT_IDENTITY = 32

POINT_FLAG_NAMES = {
    POINT_FAILED: "failed", POINT_NOT_CONVERGED: "not-converged",
    POINT_DEGENERATE: "degenerate", POINT_THRESHOLD_UNCERTAIN: "threshold-uncertain",
    POINT_NOT_MEMBER: "not-member", POINT_IDENTITY: "identity",
}

IDENTITY_TOL = 1e-4
ASYMPTOTIC_TOL = 0.05
BOUND_SLACK = 1e-6


@dataclass
class BranchCurve:
    kind: str
    params: ProblemParams
    grid: np.ndarray
    values: np.ndarray
    multipliers: np.ndarray
    residual_max: np.ndarray
    point_flags: np.ndarray
    flags: dict[str, bool]
    details: dict[str, object]
    provenance: dict[str, object]
    results: list[MinimizerResult | None] = dc_field(default_factory=list, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("parameter grid must be strictly increasing")

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def failed_flags(self) -> list[str]:
        return [k for k, v in self.flags.items() if not v]

    def rows(self) -> list[tuple]:
        return [(float(x), float(v), float(c), float(r), int(f)) for x, v, c, r, f in
                zip(self.grid, self.values, self.multipliers, self.residual_max, self.point_flags)]


def _strictly_increasing(x: Sequence[float]) -> bool:
    return bool(np.all(np.diff(np.asarray(x)) > 0))


def _ok(mask: np.ndarray) -> np.ndarray:
    return (mask & (POINT_FAILED | POINT_NOT_CONVERGED | POINT_DEGENERATE)) == 0


def _solve_one(solver, args: tuple, kwargs: dict, x: float):
    try:
        return solver(x, *args, **kwargs)
    except ArtifactError:
        return None


def _solve_points(grid, solver: Callable[..., MinimizerResult], args: tuple = (),
                  kwargs: dict | None = None, jobs: int = 1):
    """Solve every sweep point; ``jobs > 1`` fans points out to worker processes.

    Results come back in grid order whatever the scheduling, so the curve
    does not depend on ``jobs``.
    """
    kwargs = kwargs or {}
    xs = [float(x) for x in grid]
    task = partial(_solve_one, solver, args, kwargs)
    if jobs > 1 and len(xs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(xs))) as pool:
            results = list(pool.map(task, xs))
    else:
        results = [task(x) for x in xs]
    flags = []
    for res in results:
        f = 0
        if res is None:
            f = POINT_FAILED
        elif res.degenerate_flag:
            f |= POINT_DEGENERATE
        elif not res.converged:
            f |= POINT_NOT_CONVERGED
        flags.append(f)
    return results, np.asarray(flags, dtype=np.int64)


def _arrays(results):
    nan = math.nan
    vals = np.array([r.value if r else nan for r in results])
    mult = np.array([r.multiplier if r else nan for r in results])
    resid = np.array([r.residual_max if r else nan for r in results])
    return vals, mult, resid


def _identity_flag(res: MinimizerResult) -> bool:
    keys = ("Nc", "Pc", "P1", "P2")
    return all(abs(res.residuals[k]) <= IDENTITY_TOL for k in keys if k in res.residuals)


def _provenance(opts: SolverOptions) -> dict:
    return {"solver": {k: getattr(opts, k) for k in opts.__dataclass_fields__}}


def concave_on(x: np.ndarray, y: np.ndarray, tol: float) -> bool:
    """Every interior point lies on or above the chord of its neighbours (within ``tol``)."""
    for i in range(1, len(x) - 1):
        w = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1])
        chord = (1 - w) * y[i - 1] + w * y[i + 1]
        if y[i] < chord - tol:
            return False
    return True


@lru_cache(maxsize=32)
def _optimizer_A(dim: int, sigma: float, opts: SolverOptions) -> MinimizerResult:
    return minimize_A(ProblemParams(dim, sigma), None, opts)


def optimizer_A(params: ProblemParams, opts: SolverOptions | None = None) -> MinimizerResult:
    """The K optimiser on its automatic grid, solved once per ``(N, sigma, opts)``.

    The result is shared between callers and must not be mutated.
    """
    return _optimizer_A(params.dim, float(params.sigma), opts or SolverOptions())


# -- E_min(m) -------------------------------------------------------------------

def scan_Emin(m_grid: Sequence[float], params: ProblemParams, opts: SolverOptions | None = None,
              k_star: float | None = None, m0: float | None = None, jobs: int = 1) -> BranchCurve:
    """Global minimum energy at fixed mass along ``m_grid``."""
    opts = opts or SolverOptions()
    m = np.asarray(m_grid, dtype=float)
    if params.regime == "supercritical":
        raise RegimeError("energy is unbounded below at every mass for sigma > 4/N")
    results, pflags = _solve_points(m, minimize_global, (params, None, opts), {"k_star": k_star}, jobs)
    vals, mult, resid = _arrays(results)
    if m0 is not None:
        near = np.abs(m - m0) <= 0.1 * m0
        pflags[near] |= POINT_THRESHOLD_UNCERTAIN
    solved = (pflags & POINT_FAILED) == 0
    ok = _ok(pflags)
    scale = max(1.0, float(np.nanmax(np.abs(vals[solved])))) if solved.any() else 1.0
    flags: dict[str, bool] = {}
    details: dict[str, object] = {}
    flags["coverage"] = bool(solved.all())
    xs, ys = m[solved], vals[solved]
    flags["concavity"] = len(xs) >= 3 and concave_on(xs, ys, 1e-6 * scale)
    flags["below_minus_m"] = bool(np.all(ys <= -xs + BOUND_SLACK))
    # E_min(m)/m -> -1 as m -> 0: the excess below -1 must shrink towards the small end.
    low = xs <= xs[0] * 10.0 if len(xs) else xs
    excess = -(ys[low] / xs[low]) - 1.0
    details["small_m_excess"] = excess.tolist()
    flags["small_m_ratio"] = len(excess) >= 2 and bool(np.all(np.diff(excess) >= -1e-12))
    flags["multiplier_increasing"] = ok.sum() >= 2 and _strictly_increasing(mult[ok])
    if params.regime == "subcritical":
        top = xs >= xs[-1] / 10.0
        ratio = ys[top] / xs[top]
        details["top_ratio"] = ratio.tolist()
        flags["ratio_decreasing_top"] = len(ratio) >= 2 and bool(np.all(np.diff(ratio) < 0))
    details["degenerate"] = ((pflags & POINT_DEGENERATE) != 0).tolist()
    return BranchCurve("emin", params, m, vals, mult, resid, pflags, flags, details,
                       _provenance(opts), results)


# -- t(c) -------------------------------------------------------------------------

def large_c_limits(params: ProblemParams, I: float) -> dict[str, float]:
    ns, sig = params.n_sigma, params.sigma
    power = I ** ((sig + 1.0) / sig)
    return {
        "mass": (4.0 * (sig + 1.0) - ns) / (4.0 * (sig + 1.0)) * power,
        "bilap": ns / (4.0 * (sig + 1.0)) * power,
        "lp": power,
    }


def large_c_scaled(params: ProblemParams, c: float, ground: Field) -> dict[str, float]:
    """Ground-state norms multiplied by the powers of ``1 + c`` that make them converge."""
    dim, sig = params.dim, params.sigma
    n = sobolev_norms(ground)
    lp = lp_norm(ground, 2.0 * sig + 2.0) ** (2.0 * sig + 2.0)
    return {
        "mass": (1.0 + c) ** (dim / 4.0 - 1.0 / sig) * n.mass,
        "bilap": (1.0 + c) ** (dim / 4.0 - 1.0 / sig - 1.0) * n.bilap2,
        "lp": (1.0 + c) ** (dim / 4.0 - 1.0 / sig - 1.0) * lp,
    }


def tc_bounds(params: ProblemParams, c: float, I: float) -> tuple[float, float]:
    expo = 1.0 - params.n_sigma / (4.0 * (params.sigma + 1.0))
    upper = (1.0 + c) ** expo * I
    return (1.0 - 1.0 / math.sqrt(1.0 + c)) * upper, upper


def scan_tc(c_grid: Sequence[float], params: ProblemParams, opts: SolverOptions | None = None,
            I: float | None = None, jobs: int = 1) -> BranchCurve:
    """Minimum of ``T_c`` along ``c_grid`` with monotonicity, sandwich and asymptotic checks."""
    opts = opts or SolverOptions()
    c = np.asarray(c_grid, dtype=float)
    if np.any(c <= 0):
        raise RegimeError("c_grid must be positive")
    if I is None:
        I = optimizer_A(params, opts).value
    results, pflags = _solve_points(c, minimize_Tc, (params, None, opts), None, jobs)
    vals, mult, resid = _arrays(results)
    flags: dict[str, bool] = {}
    details: dict[str, object] = {"I": I}
    solved = (pflags & POINT_FAILED) == 0
    flags["coverage"] = bool(solved.all())
    for i, r in enumerate(results):
        if r is not None and not _identity_flag(r):
            pflags[i] |= POINT_IDENTITY
    flags["identities"] = bool(np.all((pflags & POINT_IDENTITY) == 0))
    flags["monotone"] = _strictly_increasing(vals[solved])
    sandwich = []
    for x, v in zip(c[solved], vals[solved]):
        lo, hi = tc_bounds(params, x, I)
        sandwich.append(bool(lo < v < hi))
    details["sandwich"] = sandwich
    flags["sandwich"] = all(sandwich)
    cs, ts = c[solved], vals[solved]
    bottom = cs <= cs[0] * 10.0
    if bottom.sum() >= 2:
        slope = float(np.polyfit(np.log(cs[bottom]), np.log(ts[bottom]), 1)[0])
        details["small_c_slope"] = slope
        # t(c) <= C sqrt(c) forces a log-log slope of at least 1/2 near zero.
        flags["small_c_sqrt"] = slope >= 0.5 - 0.02
    limits = large_c_limits(params, I)
    details["large_c_limits"] = limits
    large = []
    for i in np.argsort(c)[-2:]:
        r = results[i]
        if r is None:
            large.append({"c": float(c[i]), "ok": False})
            continue
        scaled = large_c_scaled(params, float(c[i]), r.extra["ground_state"])
        errs = {k: abs(scaled[k] - limits[k]) / limits[k] for k in limits}
        large.append({"c": float(c[i]), "scaled": scaled, "rel_err": errs,
                      "ok": all(e <= ASYMPTOTIC_TOL for e in errs.values())})
    details["large_c"] = large
    flags["large_c_limits"] = all(item["ok"] for item in large)
    if params.n_sigma > 4:
        members = []
        for i, r in enumerate(results):
            if r is None:
                members.append(None)
                continue
            D = functional_suite(r.extra["ground_state"], params.with_c(float(c[i]))).D
            members.append(D)
            if not D > 0:
                pflags[i] |= POINT_NOT_MEMBER
        details["D"] = members
    return BranchCurve("tc", params, c, vals, mult, resid, pflags, flags, details,
                       _provenance(opts), results)


# -- tilde E_min(m) ----------------------------------------------------------------

def ordered_chain(norms: dict[str, float], dim: int, sigma: float) -> tuple[float, float, float]:
    """Margins of the three strict inequalities of the ordered chain (all positive when it holds)."""
    ns = dim * sigma
    lhs = (ns - 2.0) / (ns - 4.0) * norms["mass"]
    mid = (ns - 4.0) / (ns - 2.0) * norms["bilap2"]
    low = ns / (4.0 * (sigma + 1.0)) * (ns / 2.0 - 2.0) * norms["lp"]
    return lhs - norms["grad2"], norms["grad2"] - mid, mid - low


def scan_Etilde(m_grid: Sequence[float], params: ProblemParams, opts: SolverOptions | None = None,
                mu0: float | None = None, B: float | None = None, jobs: int = 1) -> BranchCurve:
    """Local minimum energy on the inflection set along ``m_grid`` (all below ``mu0``)."""
    opts = opts or SolverOptions()
    if not params.n_sigma > 4:
        raise RegimeError("the local problem needs sigma > 4/N")
    m = np.asarray(m_grid, dtype=float)
    if mu0 is None:
        if B is None:
            B = optimizer_A(params, opts).extra["B"]
        mu0 = mu0_threshold(params.dim, params.sigma, B)
    if np.any(m >= mu0):
        raise RegimeError(f"mass grid must lie below mu0 = {mu0:.6g}")
    results, pflags = _solve_points(m, minimize_local, (params, None, opts), {"mu0": mu0}, jobs)
    vals, mult, resid = _arrays(results)
    solved = (pflags & POINT_FAILED) == 0
    xs, ys = m[solved], vals[solved]
    flags: dict[str, bool] = {"coverage": bool(solved.all())}
    details: dict[str, object] = {"mu0": mu0}
    flags["below_minus_m"] = bool(np.all(ys <= -xs + BOUND_SLACK))
    floor = np.array([local_energy_floor(params.dim, params.sigma, x) for x in xs])
    flags["above_floor"] = bool(np.all(ys >= floor - BOUND_SLACK))
    flags["decreasing"] = bool(np.all(np.diff(ys) < 0))
    flags["ratio_nonincreasing"] = bool(np.all(np.diff(ys / xs) <= BOUND_SLACK))
    bound = local_multiplier_bound(params.dim, params.sigma)
    mults = mult[solved]
    flags["multiplier_bound"] = bool(np.all((mults > 0) & (mults < bound)))
    chains = []
    for r in results:
        if r is None:
            continue
        chains.append(ordered_chain(r.extra["fiber_norms"], params.dim, params.sigma))
    details["chain_margins"] = [list(ch) for ch in chains]
    flags["ordered_chain"] = all(min(ch) > 0 for ch in chains)
    pairs = []
    lookup = {round(float(x), 12): float(y) for x, y in zip(xs, ys)}
    for i, a in enumerate(xs):
        for b in xs[i:]:
            key = round(float(a + b), 12)
            hit = [k for k in lookup if math.isclose(k, key, rel_tol=1e-9)]
            if hit:
                lhs = lookup[hit[0]]
                rhs = lookup[round(float(a), 12)] + lookup[round(float(b), 12)]
                pairs.append((float(a), float(b), bool(lhs <= rhs + BOUND_SLACK)))
    details["subadditivity_pairs"] = pairs
    flags["subadditivity"] = len(pairs) > 0 and all(p[2] for p in pairs)
    details["degenerate"] = ((pflags & POINT_DEGENERATE) != 0).tolist()
    return BranchCurve("etilde", params, m, vals, mult, resid, pflags, flags, details,
                       _provenance(opts), results)


# -- constants --------------------------------------------------------------------

@dataclass
class ConstantsReport:
    dim: int
    sigma: float
    B: float
    I: float
    C: float
    k_star: float
    M: float | None
    m0: float | None
    mu0: float | None
    B_direct: float
    identity_error: float
    M_restricted: bool = False
    checks: dict[str, bool] = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("dim", "sigma", "B", "I", "C", "k_star", "M", "m0",
                                              "mu0", "B_direct", "identity_error", "M_restricted")} | \
            {"checks": dict(self.checks)}


def best_constants(params: ProblemParams, opts: SolverOptions | None = None,
                   with_M: bool = True, M_grid=None, restriction_R: float | None = None) -> ConstantsReport:
    """Best constants ``B, I, C, k*, mu0, M, m0`` for ``(N, sigma)``.

    ``B`` is measured twice: through ``I`` (``B = (C/I)^(sigma+1)``) and
    directly as the Gagliardo-Nirenberg-Sobolev ratio of the optimiser.
    ``M`` is only estimated where the quotient is bounded, unless a
    restriction radius is given.
    """
    opts = opts or SolverOptions()
    dim, sig = params.dim, params.sigma
    A = optimizer_A(params, opts)
    I = A.value
    C = _best_constant_C(dim, sig)
    B_direct = gns_quotient(A.field, sig)
    B = B_direct
    identity_error = abs(I - C * B_direct ** (-1.0 / (sig + 1.0))) / I
    k_star = critical_mass_kstar(dim, sig, B)
    mu0 = mu0_threshold(dim, sig, B) if params.n_sigma > 4 else None
    M = m0 = None
    restricted = False
    if with_M:
        bounded = classify_sigma(dim, sig).classification == BOUNDED
        if bounded or restriction_R is not None:
            grid = M_grid or make_grid(dim, 64.0, 512 if dim == 1 else 64)
            est = estimate_M(dim, 2.0, 2.0 * sig + 2.0, sig / (sig + 1.0), grid,
                             restriction_R=None if bounded else restriction_R, sigma=sig)
            M, m0 = est.value, est.m0
            restricted = not bounded
    rep = ConstantsReport(dim, sig, B, I, C, k_star, M, m0, mu0, B_direct, identity_error, restricted)
    rep.checks["I_identity"] = identity_error <= 1e-4
    if m0 is not None and math.isclose(sig, 4.0 / dim):
        rep.checks["m0_below_kstar"] = m0 < k_star
    return rep


# -- asymptotic regimes -------------------------------------------------------------

@dataclass
class LargeCReport:
    c: float
    K_distance: float
    Kc_value: float
    Kc_bounds: tuple[float, float]
    virial: dict[str, float]
    virial_limits: dict[str, float]
    passed: bool


def _K(field: Field) -> float:
    n = sobolev_norms(field)
    return n.bilap2 + n.mass


def large_c_rescaling_check(c: float, params: ProblemParams, opts: SolverOptions | None = None,
                            tol: float = ASYMPTOTIC_TOL) -> LargeCReport:
    """Rescale the ``T_c`` ground state to an ``A_c`` candidate and compare it with the ``A`` optimiser."""
    opts = opts or SolverOptions()
    dim, sig = params.dim, params.sigma
    tc = minimize_Tc(c, params, None, opts)
    ground: Field = tc.extra["ground_state"]
    a = (1.0 + c) ** (dim / (8.0 * (sig + 1.0))) * tc.value ** (1.0 / (2.0 * sig))
    b = (1.0 + c) ** -0.25
    # v(y) = u(b y) / a is wider than u by 1/b; embed u in a box that holds the A optimiser.
    A0 = optimizer_A(params, opts)
    need = grid_for_A(dim).half_width
    h = ground.grid.h
    n = ground.grid.n
    while n * h / 2.0 < need:
        n *= 2
    wide = embed(ground, make_grid(dim, n * h / 2.0, n))
    v = gauge_fix(rescale(wide, 1.0 / a, 1.0 / b, warn=False))
    # The A optimiser nearest to v, on the same grid.
    Q = minimize_A(params, v.grid, opts, starts=[("rescaled", np.asarray(v.physical))]).field
    candidates = []
    for sign in (1.0, -1.0):
        for flip in (False, True):
            vals = np.asarray(Q.physical)
            if flip:
                vals = np.roll(np.flip(vals), 1, axis=tuple(range(dim)))
            candidates.append(Field(Q.grid, sign * vals))
    diff = min(_K(Field(v.grid, np.asarray(v.physical) - np.asarray(q.physical))) for q in candidates)
    KQ = _K(Q)
    nv = sobolev_norms(v)
    Kc = nv.bilap2 - 2.0 / math.sqrt(1.0 + c) * nv.grad2 + nv.mass
    I = A0.value
    ns = params.n_sigma
    virial = {"bilap": nv.bilap2, "mass": nv.mass}
    limits = {"bilap": ns / (4.0 * (sig + 1.0)) * I,
              "mass": (4.0 * (sig + 1.0) - ns) / (4.0 * (sig + 1.0)) * I}
    bounds = ((1.0 - 1.0 / math.sqrt(1.0 + c)) * I, I)
    dist = diff / KQ
    ok = dist <= tol and bounds[0] <= Kc <= bounds[1] * (1 + 1e-9)
    return LargeCReport(c, dist, Kc, bounds, virial, limits, bool(ok))


@dataclass
class SmallCReport:
    c_grid: list[float]
    bilap: list[float]
    grad: list[float]
    shifted: list[float]
    l4: list[float]
    flags: dict[str, bool]


def small_c_degeneration_check(c_grid: Sequence[float], params: ProblemParams,
                               opts: SolverOptions | None = None) -> SmallCReport:
    """Trends of the mass-normalised ground state as ``c`` decreases to zero."""
    opts = opts or SolverOptions()
    if not (params.dim - 4) * params.sigma < 4:
        raise RegimeError("needs (N - 4) sigma < 4")
    cs = [float(x) for x in c_grid]
    if any(b >= a for a, b in zip(cs, cs[1:])):
        raise ValueError("c_grid must decrease")
    bil, grd, sh, l4 = [], [], [], []
    for c in cs:
        ground: Field = minimize_Tc(c, params, None, opts).extra["ground_state"]
        n = sobolev_norms(ground)
        v = ground.scaled(1.0 / math.sqrt(n.mass))
        nv = sobolev_norms(v)
        bil.append(math.sqrt(nv.bilap2))
        grd.append(math.sqrt(nv.grad2))
        sh.append(math.sqrt(nv.shifted2))
        l4.append(lp_norm(v, 4.0))
    flags = {
        "shifted_decreasing": all(b < a for a, b in zip(sh, sh[1:])),
        "shifted_small": sh[-1] <= 0.1,
        "bilap_near_one": abs(bil[-1] - 1.0) <= 0.1,
        "l4_decreasing": all(b < a for a, b in zip(l4, l4[1:])),
    }
    return SmallCReport(cs, bil, grd, sh, l4, flags)
