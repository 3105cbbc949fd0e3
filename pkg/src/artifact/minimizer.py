"""Preconditioned constrained descent for the ground-state problems.

Four problem families are handled by one engine:

* minimum energy at fixed mass (``minimize_global``),
* minimum of ``T_c`` on the unit ``L^(2 sigma + 2)`` sphere (``minimize_Tc``),
* minimum of ``K`` / ``K_c`` on the same sphere (``minimize_A``, ``minimize_Ac``),
* local energy minimum at fixed mass inside the inflection set, kept on the
  zero set of the fiber derivative by projection (``minimize_local``).

The quotient problems minimise a degree-zero homogeneous Rayleigh quotient
``<L u, u> / ||u||_p^2`` and renormalise after every step.  The mass problems
take a projected, preconditioned energy step and rescale to the mass sphere.
Search directions are preconditioned nonlinear conjugate gradients with
Armijo backtracking; every accepted step decreases the objective.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy import fft as sfft

from .errors import MembershipError, RegimeError
from .functionals import (ProblemParams, functional_suite,
                          h_membership_threshold, virial_coefficient)
from .spectral import (PHYSICAL, BoundaryTailWarning, Field, Grid, GridError, embed,
                       fiber_scale, gauge_fix, lp_integral, make_grid, random_bandlimited,
                       sobolev_norms)

# A converged field is called delocalised when this much mass sits in the
# outer shell of the box.
DELOCALISED_TAIL = 1e-3
LP_DEGENERATE = 1e-6


# -- fiber calculus -------------------------------------------------------------

@dataclass(frozen=True)
class FiberRoots:
    """Critical points of ``f(t) = a t^2 - 2 b t - cc t^q`` with ``q = N sigma / 2``."""

    a: float
    b: float
    cc: float
    q: float
    t_infl: float
    slope_at_infl: float
    exists: bool
    t1: float | None = None
    t2: float | None = None

    def f(self, t: float) -> float:
        return self.a * t * t - 2.0 * self.b * t - self.cc * t ** self.q

    def df(self, t: float) -> float:
        return 2.0 * self.a * t - 2.0 * self.b - self.q * self.cc * t ** (self.q - 1.0)

    def d2f(self, t: float) -> float:
        return 2.0 * self.a - self.q * (self.q - 1.0) * self.cc * t ** (self.q - 2.0)


def _safeguarded_newton(fn, dfn, lo: float, hi: float, increasing: bool) -> float:
    """Root of a monotone function on [lo, hi] with a sign change."""
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = fn(x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == increasing:
            lo = x
        else:
            hi = x
        d = dfn(x)
        step_ok = d != 0.0
        if step_ok:
            xn = x - fx / d
            step_ok = lo < xn < hi
        x_new = xn if step_ok else 0.5 * (lo + hi)
        if abs(x_new - x) <= 4e-16 * max(abs(x), 1e-300):
            return x_new
        x = x_new
    return x


def fiber_roots_from_coefficients(a: float, b: float, cc: float, q: float) -> FiberRoots:
    """Closed-form inflection point and Newton-refined roots of ``f'``."""
    if not q > 2.0:
        raise RegimeError("fiber roots need N sigma > 4")
    if not (a > 0 and b >= 0 and cc > 0):
        raise ValueError("coefficients must satisfy a > 0, b >= 0, cc > 0")
    t_infl = (2.0 * a / (q * (q - 1.0) * cc)) ** (1.0 / (q - 2.0))
    proto = FiberRoots(a, b, cc, q, t_infl, 0.0, False)
    slope = proto.df(t_infl)
    if not slope > 0.0:
        return replace(proto, slope_at_infl=slope)
    t1 = _safeguarded_newton(proto.df, proto.d2f, 0.0, t_infl, increasing=True)
    hi = 2.0 * t_infl
    while proto.df(hi) > 0.0:
        hi *= 2.0
    t2 = _safeguarded_newton(proto.df, proto.d2f, t_infl, hi, increasing=False)
    return FiberRoots(a, b, cc, q, t_infl, slope, True, t1, t2)


def fiber_roots(field: Field, sigma: float) -> FiberRoots:
    """Fiber critical points of ``t -> E(u_t)`` for a nonzero field."""
    q = field.grid.dim * sigma / 2.0
    if not q > 2.0:
        raise RegimeError("fiber roots need sigma > 4/N")
    n = sobolev_norms(field)
    lp = lp_integral(field, 2.0 * sigma + 2.0)
    return fiber_roots_from_coefficients(n.bilap2, n.grad2, lp / (sigma + 1.0), q)


def fiber_gap_function(s, q: float):
    """``h`` with ``f(t_infl) - f(t1) = h(t_infl / t1) t1^q cc``."""
    s = np.asarray(s, dtype=float)
    return (0.5 * (q + 1.0) * (q - 2.0) * s ** q - q * (q - 1.0) * s ** (q - 1.0)
            + 0.5 * q * (q - 1.0) * s ** (q - 2.0) + q * (s - 1.0) + 1.0)


# -- solver options and results -----------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    tol_residual: float = 1e-8
    tol_rel_change: float = 1e-12
    change_window: int = 10
    max_iter: int = 200_000
    random_starts: int = 4
    gaussian_start: bool = True
    seed: int = 0
    armijo: float = 1e-4
    initial_step: float = 0.5
    max_backtracks: int = 60
    conjugate: bool = True
    preconditioner: str = "operator"
    history_cap: int = 1000
    start_cutoff: float = 1.5
    stall_window: int = 3000

    def __post_init__(self):
        if self.preconditioner not in ("operator", "biharmonic"):
            raise ValueError("preconditioner must be 'operator' or 'biharmonic'")
        if self.random_starts < 0 or (self.random_starts == 0 and not self.gaussian_start):
            raise ValueError("need at least one start")


@dataclass
class MinimizerResult:
    field: Field
    value: float
    multiplier: float
    residuals: dict[str, float]
    iterations: int
    converged: bool
    history: list[tuple[int, float, float]]
    degenerate_flag: bool
    problem: str
    params: ProblemParams
    seed: int
    start: str
    gauge_shift: list[float] = dc_field(default_factory=list)
    extra: dict = dc_field(default_factory=dict)

    @property
    def residual_max(self) -> float:
        return max(abs(v) for v in self.residuals.values())


# -- the descent engine ---------------------------------------------------------

class _Problem:
    """Objective, tangent projection and retraction on one constraint surface."""

    name = ""

    def __init__(self, grid: Grid, params: ProblemParams, opts: SolverOptions):
        self.grid = grid
        self.params = params
        self.opts = opts
        self.w = grid.cell_volume
        r2 = grid.xi_squared()
        self.r2 = r2
        self.bih = 1.0 / (1.0 + r2 * r2)

    # Fourier helpers on raw arrays
    def fwd(self, u):
        return sfft.fftn(u)

    def inv(self, uh):
        return sfft.ifftn(uh)

    def apply(self, sym, u):
        return self.inv(sym * self.fwd(u))

    def dot(self, a, b) -> float:
        return float(np.real(np.vdot(a, b))) * self.w

    def residual(self, u, g) -> float:
        """Dual-norm size of a tangent gradient relative to the primal size of u."""
        gh = self.fwd(g)
        uh = self.fwd(u)
        num = float(np.sum(self.bih * np.abs(gh) ** 2))
        den = float(np.sum(np.abs(uh) ** 2 / self.bih))
        return math.sqrt(num / den) if den > 0 else math.inf

    # Problem-specific interface
    def value_grad(self, u):  # -> (value, tangent gradient)
        raise NotImplementedError

    def precondition(self, u, g):
        raise NotImplementedError

    def retract(self, u):
        raise NotImplementedError

    def admissible(self, u) -> bool:
        return True


class _QuotientProblem(_Problem):
    """Minimise ``<L u, u> / ||u||_p^2`` over the unit ``L^p`` sphere."""

    def __init__(self, grid, params, opts, symbol: np.ndarray, name: str):
        super().__init__(grid, params, opts)
        self.sym = symbol
        self.name = name
        self.p = params.p
        if opts.preconditioner == "operator":
            self.pre = 1.0 / symbol
        else:
            self.pre = self.bih

    def value_grad(self, u):
        uh = self.fwd(u)
        lu = self.inv(self.sym * uh)
        quad = self.dot(u, lu)
        absu = np.abs(u)
        lp = float(np.sum(absu ** self.p)) * self.w
        norm2 = lp ** (2.0 / self.p)
        val = quad / norm2
        g = 2.0 * (lu - val * absu ** (self.p - 2.0) * u / lp ** (1.0 - 2.0 / self.p)) / norm2
        return val, g

    def precondition(self, u, g):
        return self.apply(self.pre, g)

    def retract(self, u):
        lp = float(np.sum(np.abs(u) ** self.p)) * self.w
        return u / lp ** (1.0 / self.p)


class _MassProblem(_Problem):
    """Minimise E on the sphere ``||u||^2 = m``."""

    name = "pm"

    def __init__(self, grid, params, opts):
        super().__init__(grid, params, opts)
        self.mass = params.mass
        self.sig = params.sigma
        # The flow minimises E + ||u||^2 = ||(Lap + 1) u||^2 - ||u||_p^p / (sigma + 1): on the
        # sphere it differs from E by the constant m, but near E = -m it is computed without
        # cancellation, so line searches keep resolving decrease.
        self.sym = (self.r2 - 1.0) ** 2
        # E + (1 + shift) m has a positive-definite quadratic part for shift > 0;
        # its inverse is the operator preconditioner.
        if opts.preconditioner == "operator":
            self.pre = 1.0 / ((self.r2 - 1.0) ** 2 + 0.5)
        else:
            self.pre = self.bih

    def energy_grad(self, u):
        uh = self.fwd(u)
        lu = self.inv(self.sym * uh)
        absu = np.abs(u)
        p = 2.0 * self.sig + 2.0
        lp = float(np.sum(absu ** p)) * self.w
        val = self.dot(u, lu) - lp / (self.sig + 1.0)
        g = 2.0 * (lu - absu ** (2.0 * self.sig) * u)
        return val, g

    def value_grad(self, u):
        val, g = self.energy_grad(u)
        g = g - (self.dot(u, g) / self.dot(u, u)) * u
        return val, g

    def precondition(self, u, g):
        pg = self.apply(self.pre, g)
        pu = self.apply(self.pre, u)
        beta = self.dot(u, pg) / self.dot(u, pu)
        return pg - beta * pu

    def retract(self, u):
        return u * math.sqrt(self.mass / (self.dot(u, u)))


class _LocalProblem(_MassProblem):
    """Fiber-reduced energy ``u -> E(u_(t1(u)))`` on the mass sphere.

    The fiber minimum is evaluated in closed form from ``(||Lap u||^2,
    ||grad u||^2, ||u||_p^p)``, so the projection onto ``P1 = 0`` never has to
    dilate the iterate; the gradient follows from the envelope theorem.  The
    returned field is dilated once, at the end.
    """

    name = "local"

    def __init__(self, grid, params, opts):
        super().__init__(grid, params, opts)
        self.q = grid.dim * self.sig / 2.0
        self.last_roots: FiberRoots | None = None

    def _roots(self, u) -> FiberRoots | None:
        uh = self.fwd(u)
        dens = np.abs(uh) ** 2
        scale = self.w / self.grid.size
        a = float(np.sum(self.r2 * self.r2 * dens)) * scale
        b = float(np.sum(self.r2 * dens)) * scale
        lp = float(np.sum(np.abs(u) ** (2.0 * self.sig + 2.0))) * self.w
        if not (a > 0 and lp > 0):
            return None
        return fiber_roots_from_coefficients(a, b, lp / (self.sig + 1.0), self.q)

    def admissible(self, u) -> bool:
        roots = self._roots(u)
        return roots is not None and roots.exists

    def value_grad(self, u):
        roots = self._roots(u)
        self.last_roots = roots
        t = roots.t1
        uh = self.fwd(u)
        lin = self.inv((t * t * self.r2 * self.r2 - 2.0 * t * self.r2) * uh)
        g = 2.0 * (lin - t ** self.q * np.abs(u) ** (2.0 * self.sig) * u)
        g = g - (self.dot(u, g) / self.dot(u, u)) * u
        return roots.f(t), g

    def retract(self, u):
        u = super().retract(u)
        return u if self.admissible(u) else None

    def project(self, u) -> np.ndarray:
        """Move ``u`` to its fiber minimum by an explicit dilation.

        Box-filling fields are returned unchanged: a non-integer dilation of a
        field that does not decay inside the box is not accurate.
        """
        roots = self._roots(u)
        if roots is None or not roots.exists or abs(roots.t1 - 1.0) < 1e-15:
            return u
        if Field(self.grid, u, PHYSICAL).tail_fraction > DELOCALISED_TAIL:
            return u
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryTailWarning)
            moved = fiber_scale(Field(self.grid, u, PHYSICAL), roots.t1, warn=False)
        return _MassProblem.retract(self, np.asarray(moved.physical))


@dataclass
class _RunOutcome:
    u: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool
    history: list


def _descend(prob: _Problem, u0: np.ndarray) -> _RunOutcome:
    opts = prob.opts
    u = prob.retract(u0)
    if u is None or not prob.admissible(u):
        raise MembershipError("initial field is outside the admissible set")
    val, g = prob.value_grad(u)
    pg = prob.precondition(u, g)
    d = pg
    g_pg = prob.dot(g, pg)
    step = opts.initial_step
    values = [val]
    history = []
    log_every = max(1, opts.max_iter // opts.history_cap)
    res = prob.residual(u, g)
    best_res, best_at = res, 0
    converged = False
    it = 0
    while it < opts.max_iter:
        it += 1
        slope = prob.dot(g, d)
        if not slope > 0.0:
            d, slope = pg, g_pg
            if not slope > 0.0:
                break
        accepted = False
        trial_step = step
        for _ in range(opts.max_backtracks):
            trial = prob.retract(u - trial_step * d)
            if trial is not None and prob.admissible(trial):
                tval, tg = prob.value_grad(trial)
                if tval <= val - opts.armijo * trial_step * slope:
                    accepted = True
                    break
            trial_step *= 0.5
        if not accepted:
            if d is not pg:
                # Restart from steepest descent once before giving up.
                d = pg
                it -= 1
                step = opts.initial_step
                continue
            break
        u = trial
        tpg = prob.precondition(u, tg)
        tg_tpg = prob.dot(tg, tpg)
        if opts.conjugate:
            beta = max(0.0, (tg_tpg - prob.dot(tg, pg)) / g_pg) if g_pg > 0 else 0.0
            d = tpg + beta * d
        else:
            d = tpg
        val, g, pg, g_pg = tval, tg, tpg, tg_tpg
        step = min(2.0 * trial_step, 1e6)
        values.append(val)
        res = prob.residual(u, g)
        if it % log_every == 0:
            history.append((it, val, res))
        if res < 0.5 * best_res:
            best_res, best_at = res, it
        elif it - best_at > opts.stall_window:
            # Residual has hit its round-off floor; further steps cannot help.
            break
        if res < opts.tol_residual and len(values) > opts.change_window:
            old = values[-1 - opts.change_window]
            if abs(val - old) <= opts.tol_rel_change * max(abs(val), 1e-300):
                converged = True
                break
    history.append((it, val, res))
    return _RunOutcome(u, val, res, it, converged, history)


# -- starts -------------------------------------------------------------------

def _gaussian_start(grid: Grid, width: float) -> np.ndarray:
    env = np.ones(grid.shape)
    for c in grid.coords():
        env = env * np.exp(-c ** 2 / (2.0 * width ** 2))
    return env.astype(complex)


def _starts(grid: Grid, opts: SolverOptions, width: float):
    for i in range(opts.random_starts):
        rng = np.random.default_rng(opts.seed + i)
        f = random_bandlimited(grid, rng, cutoff=opts.start_cutoff, width=width)
        yield f"random-{opts.seed + i}", np.asarray(f.physical)
    if opts.gaussian_start:
        yield "gaussian", _gaussian_start(grid, width)


def _default_width(grid: Grid) -> float:
    return min(grid.half_width / 6.0, 3.0)


def _start_width(grid: Grid, c: float) -> float:
    # Envelopes of small-frequency solutions spread over roughly one decay length.
    return min(grid.half_width / 6.0, max(3.0, 1.0 / decay_rate(c)))


# -- diagnostics assembled into results -----------------------------------------

def _identity_residuals(field: Field, params: ProblemParams, scale: float) -> dict[str, float]:
    rep = functional_suite(field, params)
    s = abs(scale) if scale else 1.0
    return {"Nc": rep.Nc / s, "Pc": rep.Pc / s, "P1": rep.P1 / s, "P2": rep.P2 / s}


def _pick_best(cands: list[tuple]) -> tuple:
    """Lowest value; ties within 1e-8 go to converged runs, then the smallest ``||Lap u||^2``."""
    best = min(c[0] for c in cands)
    close = [c for c in cands if c[0] <= best + 1e-8 * max(1.0, abs(best))]
    return min(close, key=lambda c: (not c[3].converged, c[1]))


def _run_multistart(prob: _Problem, grid: Grid, opts: SolverOptions, width: float,
                    starts=None):
    cands = []
    for label, u0 in (starts if starts is not None else _starts(grid, opts, width)):
        try:
            out = _descend(prob, u0)
        except MembershipError:
            continue
        bil = sobolev_norms(Field(grid, out.u)).bilap2
        cands.append((out.value, bil, label, out))
    if not cands:
        raise MembershipError("no start produced an admissible trajectory")
    return _pick_best(cands)


def _finalize(prob, out: _RunOutcome, label: str, grid: Grid):
    raw = Field(grid, out.u)
    fixed = gauge_fix(raw)
    return fixed


# -- automatic grids ------------------------------------------------------------

DECAY_LENGTHS = 28.0
MAX_NODES = {1: 2 ** 16, 2: 2 ** 10, 3: 2 ** 7}


def decay_rate(c: float) -> float:
    """Exponential decay rate of solutions of the linearised equation at frequency ``c``."""
    return math.sqrt((math.sqrt(1.0 + c) - 1.0) / 2.0)


def oscillation_frequency(c: float) -> float:
    return math.sqrt((math.sqrt(1.0 + c) + 1.0) / 2.0)


def plan_grid(dim: int, rate: float, osc: float = 1.0, spacing: float | None = None,
              min_half_width: float = 8.0) -> Grid:
    """Power-of-two grid holding ``DECAY_LENGTHS / rate`` and resolving frequency ``osc``."""
    h = spacing if spacing is not None else 0.25 * min(1.0, 1.0 / osc)
    half = max(min_half_width, DECAY_LENGTHS / rate)
    n = 16
    while n * h / 2.0 < half:
        n *= 2
    if n > MAX_NODES.get(dim, 2 ** 6):
        raise GridError(f"grid with spacing {h:g} and half-width {half:g} exceeds the node cap")
    return make_grid(dim, n * h / 2.0, n)


def grid_for_frequency(dim: int, c: float, spacing: float | None = None) -> Grid:
    if not c > 0:
        raise RegimeError("automatic grids need a positive frequency")
    return plan_grid(dim, decay_rate(c), oscillation_frequency(c), spacing)


def grid_for_A(dim: int) -> Grid:
    # K has symbol |xi|^4 + 1 with complex roots at distance sin(pi/4) from the real axis.
    return plan_grid(dim, math.sqrt(0.5), 1.0)


def _check_grid(params: ProblemParams, grid: Grid):
    if params.dim != grid.dim:
        raise ValueError("params.dim does not match the grid dimension")


# -- public solvers -------------------------------------------------------------

def minimize_Tc(c: float, params: ProblemParams, grid: Grid | None = None,
                opts: SolverOptions | None = None, starts=None) -> MinimizerResult:
    """Minimise ``T_c`` on the unit ``L^(2 sigma + 2)`` sphere.

    ``value`` is the estimate of ``t(c)``; ``extra['ground_state']`` holds the
    rescaled solution ``v = t(c)^(1/(2 sigma)) u`` of the stationary equation.
    """
    if not c > 0:
        raise RegimeError("minimize_Tc needs c > 0")
    opts = opts or SolverOptions()
    grid = grid if grid is not None else grid_for_frequency(params.dim, c)
    _check_grid(params, grid)
    params = params.with_c(c)
    r2 = grid.xi_squared()
    prob = _QuotientProblem(grid, params, opts, (r2 - 1.0) ** 2 + c, "tc")
    val, _, label, out = _run_multistart(prob, grid, opts, _start_width(grid, c), starts)
    u = _finalize(prob, out, label, grid)
    sig = params.sigma
    v = u.scaled(val ** (1.0 / (2.0 * sig)))
    rep_v = functional_suite(v, params)
    resid = _identity_residuals(v, params, rep_v.Tc)
    resid["gradient"] = out.residual
    resid["multiplier"] = (rep_v.c_of_u - c) / (1.0 + c)
    res = MinimizerResult(u, val, rep_v.c_of_u, resid, out.iterations, out.converged,
                          out.history, False, "tc", params, opts.seed, label)
    res.extra["ground_state"] = v
    res.extra["tail"] = u.tail_fraction
    return res


def _best_constant_C(dim: int, sigma: float) -> float:
    r = 4.0 * (sigma + 1.0) / (dim * sigma)
    return r * (r - 1.0) ** (dim * sigma / (4.0 * (sigma + 1.0)) - 1.0)


def minimize_A(params: ProblemParams, grid: Grid | None = None, opts: SolverOptions | None = None,
               starts=None) -> MinimizerResult:
    """Minimise ``K = ||Lap v||^2 + ||v||^2`` on the unit ``L^(2 sigma + 2)`` sphere.

    ``value`` is ``I``; ``extra`` carries ``B = (C / I)^(sigma + 1)``.
    """
    opts = opts or SolverOptions()
    grid = grid if grid is not None else grid_for_A(params.dim)
    _check_grid(params, grid)
    r2 = grid.xi_squared()
    prob = _QuotientProblem(grid, params, opts, r2 * r2 + 1.0, "a")
    val, _, label, out = _run_multistart(prob, grid, opts, _default_width(grid), starts)
    u = _finalize(prob, out, label, grid)
    n = sobolev_norms(u)
    ns, sig = params.n_sigma, params.sigma
    resid = {
        "gradient": out.residual,
        "virial_bilap": (n.bilap2 - ns / (4.0 * (sig + 1.0)) * val) / val,
        "virial_mass": (n.mass - (4.0 * (sig + 1.0) - ns) / (4.0 * (sig + 1.0)) * val) / val,
    }
    res = MinimizerResult(u, val, math.nan, resid, out.iterations, out.converged,
                          out.history, False, "a", params, opts.seed, label)
    C = _best_constant_C(params.dim, sig)
    res.extra["C"] = C
    res.extra["B"] = (C / val) ** (sig + 1.0)
    return res


def minimize_Ac(c: float, params: ProblemParams, grid: Grid | None = None,
                opts: SolverOptions | None = None, starts=None) -> MinimizerResult:
    """Minimise ``K_c = ||Lap v||^2 - (2/sqrt(1+c)) ||grad v||^2 + ||v||^2`` on the unit sphere."""
    if not c > 0:
        raise RegimeError("minimize_Ac needs c > 0")
    opts = opts or SolverOptions()
    if grid is None:
        # Complex roots of the symbol sit at angle acos(1/sqrt(1+c))/2 off the real axis.
        half_angle = 0.5 * math.acos(1.0 / math.sqrt(1.0 + c))
        grid = plan_grid(params.dim, math.sin(half_angle), 1.0)
    _check_grid(params, grid)
    params = params.with_c(c)
    r2 = grid.xi_squared()
    prob = _QuotientProblem(grid, params, opts, r2 * r2 - 2.0 / math.sqrt(1.0 + c) * r2 + 1.0, "ac")
    val, _, label, out = _run_multistart(prob, grid, opts, _default_width(grid), starts)
    u = _finalize(prob, out, label, grid)
    resid = {"gradient": out.residual}
    return MinimizerResult(u, val, math.nan, resid, out.iterations, out.converged,
                           out.history, False, "ac", params, opts.seed, label)


def _is_degenerate(u: Field, sigma: float) -> bool:
    lpn = lp_integral(u, 2.0 * sigma + 2.0) ** (1.0 / (2.0 * sigma + 2.0))
    return lpn < LP_DEGENERATE or u.tail_fraction > DELOCALISED_TAIL


def critical_mass_kstar(dim: int, sigma: float, B: float) -> float:
    return (sigma + 1.0) ** (1.0 / sigma) * B ** (-1.0 / sigma)


# With spacing pi/16 and a power-of-two node count, |xi| = 1 is a lattice frequency,
# so delocalised plane waves at the bottom of the linear spectrum are representable.
MASS_SPACING = math.pi / 16.0
MAX_REGRIDS = 5


def minimize_global(m: float, params: ProblemParams, grid: Grid | None = None,
                    opts: SolverOptions | None = None, k_star: float | None = None,
                    starts=None) -> MinimizerResult:
    """Minimise E at fixed mass ``m`` (subcritical, or critical below ``k_star``).

    Without an explicit grid the box is chosen adaptively: solve, read the
    multiplier ``c(u)``, and re-solve on a wider box at the same spacing from
    the embedded solution until the box holds the predicted decay length.
    """
    opts = opts or SolverOptions()
    if grid is None:
        return _adaptive_mass(minimize_global, m, params, opts, starts, k_star=k_star)
    _check_grid(params, grid)
    if not m > 0:
        raise RegimeError("mass must be positive")
    params = params.with_mass(m)
    regime = params.regime
    if regime == "supercritical":
        raise RegimeError("energy is unbounded below at every mass for sigma > 4/N")
    if regime == "critical":
        if k_star is None:
            raise RegimeError("critical sigma needs the critical mass k*")
        if not m < k_star:
            raise RegimeError("energy is unbounded below for m >= k*")
    prob = _MassProblem(grid, params, opts)
    val, _, label, out = _run_multistart(prob, grid, opts, _default_width(grid), starts)
    val -= m
    out.history = [(i, v - m, r) for i, v, r in out.history]
    u = _finalize(prob, out, label, grid)
    return _mass_result(u, val, out, label, params, opts, "pm")


def _adaptive_mass(solver, m, params, opts, starts, c_guess: float = 0.5, **kw) -> MinimizerResult:
    grid = plan_grid(params.dim, decay_rate(c_guess), spacing=MASS_SPACING)
    res = solver(m, params, grid, opts, starts=starts, **kw)
    regrids = 0
    while regrids < MAX_REGRIDS:
        c_u = res.multiplier
        if not (np.isfinite(c_u) and c_u > 0):
            break
        try:
            target = plan_grid(params.dim, decay_rate(c_u), spacing=MASS_SPACING)
        except GridError:
            res.extra["grid_capped"] = True
            break
        if target.n <= grid.n:
            break
        grid = target
        start = np.asarray(embed(res.field, grid).physical)
        res = solver(m, params, grid, opts, starts=[("regrid-" + res.start, start)], **kw)
        regrids += 1
    res.extra["regrids"] = regrids
    res.extra["grid"] = (grid.dim, grid.half_width, grid.n)
    return res


def _mass_result(u, val, out, label, params, opts, name) -> MinimizerResult:
    lam_rep = functional_suite(u, params)
    c_u = lam_rep.c_of_u
    full = params.with_c(c_u)
    rep = functional_suite(u, full)
    resid = _identity_residuals(u, full, rep.Tc)
    resid["gradient"] = out.residual
    resid["mass"] = (rep.norms.mass - params.mass) / params.mass
    degenerate = _is_degenerate(u, params.sigma)
    res = MinimizerResult(u, val, c_u, resid, out.iterations, out.converged and not degenerate,
                          out.history, degenerate, name, params, opts.seed, label)
    res.extra["tail"] = u.tail_fraction
    res.extra["D"] = rep.D
    return res


def mu0_threshold(dim: int, sigma: float, B: float) -> float:
    """Mass below which every field satisfies the inflection condition."""
    ns = dim * sigma
    if ns <= 4:
        raise RegimeError("threshold defined only for N sigma > 4")
    return (B ** (-1.0 / sigma) * virial_coefficient(dim, sigma) ** (-1.0 / sigma)
            * ((ns - 2.0) / (ns - 4.0)) ** (2.0 / sigma - dim / 2.0))


def local_multiplier_bound(dim: int, sigma: float) -> float:
    ns = dim * sigma
    return -1.0 + (ns - 2.0) ** 2 / (ns * (ns - 4.0)) + 8.0 * (ns - 2.0) / (dim * (ns - 4.0) ** 2)


def local_energy_floor(dim: int, sigma: float, m: float) -> float:
    ns = dim * sigma
    return -((ns - 2.0) ** 2 / (ns * (ns - 4.0))) * m


def minimize_local(m: float, params: ProblemParams, grid: Grid | None = None,
                   opts: SolverOptions | None = None, mu0: float | None = None,
                   starts=None) -> MinimizerResult:
    """Local energy minimiser at mass ``m`` inside the inflection set (sigma > 4/N)."""
    opts = opts or SolverOptions()
    if grid is None:
        return _adaptive_mass(minimize_local, m, params, opts, starts, mu0=mu0)
    _check_grid(params, grid)
    params = params.with_mass(m)
    if not params.n_sigma > 4:
        raise RegimeError("local problem needs sigma > 4/N")
    if mu0 is not None and not m < mu0:
        raise RegimeError(f"mass {m} is not below mu0 = {mu0}")
    prob = _LocalProblem(grid, params, opts)
    width = _default_width(grid)
    if starts is None:
        starts = list(_starts(grid, opts, width))
    starts = [(label, prob.project(_MassProblem.retract(prob, np.asarray(u0))))
              for label, u0 in starts]
    val, _, label, out = _run_multistart(prob, grid, opts, width, starts)
    pre = prob._roots(out.u)
    out.u = prob.project(out.u)
    u = _finalize(prob, out, label, grid)
    res = _mass_result(u, val, out, label, params, opts, "local")
    t = pre.t1
    # Norms of the fiber minimum u_(t1), from their exact scaling laws.
    fiber_norms = {"mass": m, "bilap2": pre.a * t * t, "grad2": pre.b * t,
                   "lp": pre.cc * (params.sigma + 1.0) * t ** pre.q}
    lam = (fiber_norms["bilap2"] - 2.0 * fiber_norms["grad2"] - fiber_norms["lp"]) / m
    res.multiplier = -lam - 1.0
    res.extra["fiber_norms"] = fiber_norms
    res.extra["final_dilation"] = t
    roots = fiber_roots(u, params.sigma)
    res.extra["fiber"] = roots
    res.extra["H_threshold"] = h_membership_threshold(params.dim, params.sigma)
    return res
