"""Batch command line front-end (``python -m artifact`` or ``artifact``).

Each run reads a ``key = value`` config, computes, writes its CSV/JSON/field
outputs and finishes with an atomically written ``manifest.json`` holding the
config snapshot, seed, output digests and validation summary.

Exit codes: 0 all validation flags passed (or were waived), 1 validation
failure, 2 configuration error, 3 regime-guard error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import io as aio
from .branch import (best_constants, large_c_rescaling_check, optimizer_A, scan_Emin, scan_Etilde,
                     scan_tc, small_c_degeneration_check)
from .config import RunConfig, from_mapping, load_config, parse_config
from .errors import ConfigError, RegimeError
from .functionals import ProblemParams, functional_suite
from .inequality import (classify_region, estimate_M, finite_measure_oracle, lemma_constant,
                         profile_F, profile_G, refine, witness_sweep, FiniteMeasureInstance)
from .minimizer import (critical_mass_kstar, minimize_A, minimize_Ac, minimize_global,
                        minimize_local, minimize_Tc, mu0_threshold)
from .spectral import (Grid, GridError, annulus_bump, gaussian_wave, knapp_cap, make_grid)

OUTPUT_ROOT_ENV = "ARTIFACT_OUTPUT_ROOT"
RESIDUAL_TOL = 1e-5
ORACLE_TOL = 1e-3
PROFILE_MARGIN = 0.02

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_REGIME = 0, 1, 2, 3


@dataclass
class Outcome:
    outputs: dict[str, bytes] = dc_field(default_factory=dict)
    flags: dict[str, bool] = dc_field(default_factory=dict)

    def json(self, name: str, obj: Any) -> None:
        self.outputs[name] = aio.dumps(obj).encode()

    def csv(self, name: str, header, rows) -> None:
        self.outputs[name] = aio.csv_text(header, rows).encode()

    def field(self, stem: str, field, provenance: dict | None = None) -> None:
        self.outputs[stem + ".field"] = aio.field_bytes(field)
        self.json(stem + ".field.json", aio.field_sidecar(field, provenance))


@dataclass
class Context:
    cfg: RunConfig
    jobs: int
    resolution_doubling: bool


# -- shared helpers ------------------------------------------------------------------

def _grid(cfg: RunConfig, default: Callable[[], Grid] | None = None) -> Grid | None:
    L, n = cfg["grid.L"], cfg["grid.n"]
    if L is not None:
        try:
            return make_grid(cfg["grid.dim"], L, n)
        except GridError as exc:
            raise ConfigError(str(exc)) from exc
    return default() if default else None


def _params(cfg: RunConfig) -> ProblemParams:
    c = cfg["problem.c"] or 0.0
    m = cfg["problem.m"] or 1.0
    return ProblemParams(cfg["grid.dim"], cfg["problem.sigma"], c, m)


def _doubled(grid: Grid) -> Grid:
    return make_grid(grid.dim, grid.half_width, grid.n * 2)


def _B(params: ProblemParams, opts) -> float:
    return optimizer_A(params, opts).extra["B"]


def _k_star(cfg: RunConfig, params: ProblemParams, opts) -> float | None:
    if params.regime != "critical":
        return None
    k = cfg["problem.k_star"]
    return k if k is not None else critical_mass_kstar(params.dim, params.sigma, _B(params, opts))


def _mu0(cfg: RunConfig, params: ProblemParams, opts) -> float:
    mu0 = cfg["problem.mu0"]
    return mu0 if mu0 is not None else mu0_threshold(params.dim, params.sigma, _B(params, opts))


def _result_flags(res, degenerate_fails: bool = True) -> dict[str, bool]:
    flags = {"converged": bool(res.converged),
             "residuals": bool(res.residual_max <= RESIDUAL_TOL)}
    if degenerate_fails:
        flags["nondegenerate"] = not res.degenerate_flag
    return flags


def _single(cfg: RunConfig, key: str) -> float:
    vals = cfg.require(key)
    if len(vals) != 1:
        raise ConfigError(f"{key} must hold a single value for this command")
    return vals[0]


def _points(cfg: RunConfig):
    dims = cfg["ineq.dim"] or [cfg["grid.dim"]]
    return list(itertools.product(dims, cfg.require("ineq.s"), cfg.require("ineq.p"),
                                  cfg.require("ineq.kappa")))


# -- functionals ----------------------------------------------------------------------

def cmd_functionals(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    dim = cfg["grid.dim"]
    kind = cfg["functionals.profile"]
    if kind == "file":
        field = aio.read_field(cfg.require("functionals.path"))
    else:
        grid = _grid(cfg, lambda: make_grid(dim, 20.0, 1024 if dim == 1 else 64))
        if kind == "gaussian":
            if dim != 1:
                raise ConfigError("the Gaussian profile is one-dimensional")
            field = gaussian_wave(cfg["functionals.tau"], grid, carrier=cfg["functionals.carrier"])
        elif kind == "knapp":
            field = knapp_cap(cfg["functionals.eps"], cfg["functionals.delta"], grid)
        else:
            field = annulus_bump(cfg["problem.m"] or 1.0, cfg["functionals.eps"], grid)
    params = _params(cfg)
    rep = functional_suite(field, params)
    out = Outcome()
    extra = {"Q_kappa": rep.Q_kappa, "gns_quotient": rep.gns_quotient,
             "H_quotient": rep.H_quotient, "H_member": rep.H_member}
    out.json("functionals.json", rep.as_flat_dict() | extra)
    out.field("field", field, {"profile": kind})
    return out


# -- minimize -------------------------------------------------------------------------

_HISTORY_HEADER = ("iteration", "value", "residual")


def _solve(kind: str, cfg: RunConfig, params, grid, opts, starts=None):
    if kind == "pm":
        return minimize_global(cfg.require("problem.m"), params, grid, opts,
                               k_star=_k_star(cfg, params, opts), starts=starts)
    if kind == "tc":
        return minimize_Tc(cfg.require("problem.c"), params, grid, opts, starts=starts)
    if kind == "a":
        return minimize_A(params, grid, opts, starts=starts)
    if kind == "ac":
        return minimize_Ac(cfg.require("problem.c"), params, grid, opts, starts=starts)
    return minimize_local(cfg.require("problem.m"), params, grid, opts,
                          mu0=_mu0(cfg, params, opts), starts=starts)


def cmd_minimize(kind: str, ctx: Context) -> Outcome:
    cfg = ctx.cfg
    opts = cfg.solver_options()
    params = _params(cfg)
    res = _solve(kind, cfg, params, _grid(cfg), opts)
    record = aio.result_record(res)
    if ctx.resolution_doubling:
        fine = _doubled(res.field.grid)
        res2 = _solve(kind, cfg, params, fine, opts,
                      starts=[("refined", np.asarray(refine(res.field, fine.n).physical))])
        record["resolution"] = {"n": fine.n, "value_2n": res2.value,
                                "rel_change": abs(res2.value - res.value) / abs(res.value)}
    out = Outcome()
    out.json("result.json", record)
    out.field("result", res.field, {"problem": res.problem, "seed": res.seed, "start": res.start})
    if "ground_state" in res.extra:
        out.field("ground_state", res.extra["ground_state"], {"problem": res.problem})
    out.csv("history.csv", _HISTORY_HEADER, aio.downsample_history(res.history))
    out.flags = _result_flags(res)
    return out


# -- scans ---------------------------------------------------------------------------

_CURVE_HEADER = ("param", "value", "multiplier", "residual_max", "flags")


def _redo_point(kind: str, x: float, res, params, opts, kw: dict):
    fine = _doubled(res.field.grid)
    start = [("refined", np.asarray(refine(res.field, fine.n).physical))]
    if kind == "emin":
        return minimize_global(x, params, fine, opts, starts=start, **kw).value
    if kind == "tc":
        return minimize_Tc(x, params, fine, opts, starts=start).value
    return minimize_local(x, params, fine, opts, starts=start, **kw).value


def cmd_scan(kind: str, ctx: Context) -> Outcome:
    cfg = ctx.cfg
    opts = cfg.solver_options()
    params = _params(cfg)
    grid_vals = sorted(cfg.require("problem.values"))
    constants: dict[str, Any] = {}
    if kind == "emin":
        k_star = _k_star(cfg, params, opts)
        constants = {"k_star": k_star, "m0": cfg["problem.m0"]}
        curve = scan_Emin(grid_vals, params, opts, k_star=k_star, m0=cfg["problem.m0"],
                          jobs=ctx.jobs)
        kw = {"k_star": k_star}
    elif kind == "tc":
        curve = scan_tc(grid_vals, params, opts, jobs=ctx.jobs)
        constants = {"I": curve.details["I"]}
        kw = {}
    else:
        mu0 = _mu0(cfg, params, opts)
        constants = {"mu0": mu0}
        curve = scan_Etilde(grid_vals, params, opts, mu0=mu0, jobs=ctx.jobs)
        kw = {"mu0": mu0}
    header = list(_CURVE_HEADER)
    rows = [list(r) for r in curve.rows()]
    if ctx.resolution_doubling:
        header += ["value_2n", "rel_change"]
        for row, res in zip(rows, curve.results):
            if res is None:
                row += [math.nan, math.nan]
                continue
            v2 = _redo_point(kind, row[0], res, params, opts, kw)
            row += [v2, abs(v2 - res.value) / abs(res.value)]
    out = Outcome()
    out.csv("curve.csv", header, rows)
    out.json("curve.json", {
        "kind": curve.kind,
        "params": {"dim": params.dim, "sigma": params.sigma},
        "constants": constants,
        "flags": curve.flags,
        "details": curve.details,
        "provenance": curve.provenance,
        "seeds": [r.seed if r else None for r in curve.results],
        "starts": [r.start if r else None for r in curve.results],
        "point_flag_bits": {"failed": 1, "not-converged": 2, "degenerate": 4,
                            "threshold-uncertain": 8, "not-member": 16, "identity": 32},
    })
    out.flags = dict(curve.flags)
    return out


# -- inequality lab ----------------------------------------------------------------

def cmd_classify(ctx: Context) -> Outcome:
    rows, region = [], {}
    for dim, s, p, k in _points(ctx.cfg):
        pt = classify_region(dim, s, p, k)
        rows.append([dim, s, p, k, pt.classification, pt.kappa_clause, pt.lower_clause,
                     pt.upper_clause, pt.margin])
        region[pt.key()] = {"verdict": pt.classification, "reasons": pt.reasons,
                            "margins": list(pt.margins)}
    out = Outcome()
    out.csv("region.csv", ("dim", "s", "p", "kappa", "verdict", "kappa_clause", "lower_clause",
                           "upper_clause", "margin"), rows)
    out.json("region.json", region)
    return out


def cmd_profile(kind: str, ctx: Context) -> Outcome:
    cfg = ctx.cfg
    fn = profile_F if kind == "F" else profile_G
    t_grid = cfg["ineq.t_grid"]
    long_rows, summary = [], []
    agree = True
    for dim, s, p, k in _points(cfg):
        curve = fn(s, p, k, dim, t_grid)
        pt = classify_region(dim, s, p, k)
        for t, v in zip(curve.t, curve.values):
            long_rows.append([dim, s, p, k, t, v, curve.slope0, curve.slope_inf, curve.verdict])
        checked = pt.margin >= PROFILE_MARGIN
        match = curve.verdict == pt.classification
        if checked and kind == "F":
            agree &= match
        summary.append([dim, s, p, k, curve.slope0, curve.slope_inf, curve.predicted0,
                        curve.predicted_inf, curve.verdict, pt.classification, match])
    out = Outcome()
    out.csv("profile.csv", ("dim", "s", "p", "kappa", "t", "value", "slope0", "slopeInf",
                            "verdict"), long_rows)
    out.csv("profile_summary.csv", ("dim", "s", "p", "kappa", "slope0", "slopeInf", "predicted0",
                                    "predictedInf", "verdict", "region_verdict", "agrees"), summary)
    if kind == "F":
        out.flags["agrees_with_region"] = agree
    return out


def cmd_witness(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    family = cfg["ineq.family"]
    dim = (cfg["ineq.dim"] or [cfg["grid.dim"]])[0]
    sw = witness_sweep(family, cfg.require("ineq.params"), _single(cfg, "ineq.s"),
                       _single(cfg, "ineq.p"), _single(cfg, "ineq.kappa"), dim=dim,
                       delta=cfg["ineq.delta"])
    out = Outcome()
    out.csv("witness.csv", ("param", "quotient", "spectral_tail"),
            zip(sw.params, sw.values, sw.spectral_tails))
    out.json("witness.json", {"family": family, "dim": dim, "slope": sw.slope,
                              "predicted": sw.predicted, "direction": sw.direction,
                              "divergence_exponent": sw.divergence_exponent,
                              "predicted_divergence": sw.predicted_divergence,
                              "verdict": sw.verdict})
    out.flags["slope_sign"] = bool(np.sign(sw.slope) == np.sign(sw.predicted))
    return out


def cmd_oracle(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    opts = cfg.solver_options()
    rng = np.random.default_rng(opts.seed)
    kappa = _single(cfg, "ineq.kappa")
    expected = lemma_constant(kappa)
    rows = []
    for i in range(cfg["ineq.instances"]):
        inst = FiniteMeasureInstance.random(rng, kappa, cfg["ineq.q"], cfg["ineq.size"])
        m1, m2, ratio = finite_measure_oracle(inst, rng)
        rows.append([i, inst.size, m1, m2, ratio, expected, abs(ratio - expected) / expected])
    out = Outcome()
    out.csv("oracle.csv", ("instance", "size", "M1", "M2", "ratio", "expected", "rel_err"), rows)
    out.flags["ratio_matches"] = all(r[-1] <= ORACLE_TOL for r in rows)
    return out


def cmd_estimate_m(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    dim = (cfg["ineq.dim"] or [cfg["grid.dim"]])[0]
    grid = _grid(cfg, lambda: make_grid(dim, 64.0, 512 if dim == 1 else 64))
    if grid.dim != dim:
        raise ConfigError("grid.dim and ineq.dim disagree")
    # The ascent keeps its own tighter defaults unless solver keys are set explicitly.
    custom = any(k.startswith("solver.") for k in cfg.explicit)
    est = estimate_M(dim, _single(cfg, "ineq.s"), _single(cfg, "ineq.p"),
                     _single(cfg, "ineq.kappa"), grid, restriction_R=cfg["ineq.R"],
                     opts=cfg.solver_options() if custom else None,
                     sigma=cfg["ineq.sigma"], resolution_doubling=ctx.resolution_doubling)
    out = Outcome()
    out.json("estimate_m.json", {"M": est.value, "m0": est.m0, "witnesses": est.witnesses,
                                 "restricted": est.restricted, "converged": est.converged,
                                 "iterations": est.iterations, "value_2n": est.refined_value,
                                 "rel_change": est.resolution_change})
    out.field("maximizer", est.field, {"problem": "estimate-m"})
    out.flags["converged"] = bool(est.converged)
    return out


# -- constants and asymptotics ----------------------------------------------------------

def cmd_constants(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    params = _params(cfg)
    rep = best_constants(params, cfg.solver_options(), with_M=cfg["constants.with_M"],
                         M_grid=_grid(cfg), restriction_R=cfg["constants.R"])
    out = Outcome()
    out.json("constants.json", rep.as_dict())
    out.flags = dict(rep.checks)
    return out


def cmd_small_c(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    cs = cfg["asymptotics.c"] or [1.0, 0.3, 0.1, 0.03]
    rep = small_c_degeneration_check(cs, _params(cfg), cfg.solver_options())
    out = Outcome()
    out.csv("small_c.csv", ("c", "bilap", "grad", "shifted", "l4"),
            zip(rep.c_grid, rep.bilap, rep.grad, rep.shifted, rep.l4))
    out.json("small_c.json", rep)
    out.flags = dict(rep.flags)
    return out


def cmd_large_c(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    rep = large_c_rescaling_check(cfg.require("problem.c"), _params(cfg), cfg.solver_options())
    out = Outcome()
    out.json("large_c.json", rep)
    out.flags["rescaling"] = rep.passed
    return out


HANDLERS: dict[tuple[str, str | None], Callable[[Context], Outcome]] = {
    ("functionals", None): cmd_functionals,
    **{("minimize", k): (lambda ctx, k=k: cmd_minimize(k, ctx))
       for k in ("pm", "tc", "a", "ac", "local")},
    **{("scan", k): (lambda ctx, k=k: cmd_scan(k, ctx)) for k in ("emin", "tc", "etilde")},
    ("ineq", "classify"): cmd_classify,
    ("ineq", "profile-f"): lambda ctx: cmd_profile("F", ctx),
    ("ineq", "profile-g"): lambda ctx: cmd_profile("G", ctx),
    ("ineq", "witness"): cmd_witness,
    ("ineq", "oracle"): cmd_oracle,
    ("ineq", "estimate-m"): cmd_estimate_m,
    ("constants", None): cmd_constants,
    ("asymptotics", "small-c"): cmd_small_c,
    ("asymptotics", "large-c"): cmd_large_c,
}

_SUBCOMMANDS = {
    "minimize": {
        "pm": "global energy minimiser at mass problem.m",
        "tc": "T_c minimiser at problem.c (ground state included)",
        "a": "K minimiser on the unit L^(2 sigma + 2) sphere (value I)",
        "ac": "K_c minimiser at problem.c",
        "local": "local minimiser at mass problem.m inside the inflection set",
    },
    "scan": {
        "emin": "E_min over the masses problem.values",
        "tc": "t(c) over the frequencies problem.values",
        "etilde": "local minimum energy over the masses problem.values",
    },
    "ineq": {
        "classify": "exact region verdicts for ineq.dim x ineq.s x ineq.p x ineq.kappa",
        "profile-f": "Hausdorff-Young profile and its end slopes",
        "profile-g": "restriction-type profile and its end slopes",
        "witness": "quotient along a witness family and its fitted exponent",
        "oracle": "finite measure oracle ratio on random instances",
        "estimate-m": "lower bound for the supremum of the quotient",
    },
    "asymptotics": {
        "small-c": "normalised ground-state trends as c decreases (asymptotics.c)",
        "large-c": "rescaled ground state against the K optimiser at problem.c",
    },
}

_COLUMNS = {
    ("minimize", None): "result.json; result.field(+.json); history.csv columns: "
                        "iteration,value,residual",
    ("scan", None): "curve.csv columns: param,value,multiplier,residual_max,flags "
                    "(bit field: 1 failed, 2 not-converged, 4 degenerate, 8 threshold-uncertain, "
                    "16 not-member, 32 identity); with --resolution-doubling also "
                    "value_2n,rel_change. curve.json holds flags and details.",
    ("ineq", "classify"): "region.csv columns: dim,s,p,kappa,verdict,kappa_clause,lower_clause,"
                          "upper_clause,margin; region.json keyed by N/s/p/kappa",
    ("ineq", "profile-f"): "profile.csv columns: dim,s,p,kappa,t,value,slope0,slopeInf,verdict; "
                           "profile_summary.csv adds predicted slopes and the region verdict",
    ("ineq", "profile-g"): "profile.csv columns: dim,s,p,kappa,t,value,slope0,slopeInf,verdict; "
                           "profile_summary.csv adds predicted slopes and the region verdict",
    ("ineq", "witness"): "witness.csv columns: param,quotient,spectral_tail; witness.json",
    ("ineq", "oracle"): "oracle.csv columns: instance,size,M1,M2,ratio,expected,rel_err",
    ("ineq", "estimate-m"): "estimate_m.json; maximizer.field(+.json)",
    ("asymptotics", "small-c"): "small_c.csv columns: c,bilap,grad,shifted,l4; small_c.json",
    ("asymptotics", "large-c"): "large_c.json",
    ("functionals", None): "functionals.json (flat keys E,Sc,Tc,Kc,K,D,Nc,Pc,P1,P2,lambda,c_of_u,"
                           "mass,grad2,bilap2,shifted2,lp); field.field(+.json)",
    ("constants", None): "constants.json (B, I, C, k_star, M, m0, mu0, identity error, checks)",
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR",
                        help=f"output directory (default ${OUTPUT_ROOT_ENV}/<command>)")
    common.add_argument("--seed", type=int, metavar="U64", help="overrides solver.seed")
    common.add_argument("--jobs", type=int, metavar="K", default=None,
                        help="worker processes for sweep points (default: CPU count)")
    common.add_argument("--waive", action="append", default=[], metavar="FLAGNAME",
                        help="do not fail on this validation flag (repeatable)")
    common.add_argument("--resolution-doubling", action="store_true",
                        help="rerun at 2n and report value changes")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("functionals", "constants"):
        sub.add_parser(name, parents=[common], epilog=_COLUMNS[(name, None)],
                       help=_COLUMNS[(name, None)].split(";")[0])
    for group, entries in _SUBCOMMANDS.items():
        gp = sub.add_parser(group, help=f"{group} subcommands")
        gsub = gp.add_subparsers(dest="sub", required=True)
        for name, text in entries.items():
            epilog = _COLUMNS.get((group, name)) or _COLUMNS.get((group, None))
            gsub.add_parser(name, parents=[common], help=text, description=text, epilog=epilog)
    rr = sub.add_parser("rerun", help="repeat a run from its manifest.json")
    rr.add_argument("manifest", metavar="MANIFEST")
    rr.add_argument("--out", metavar="DIR", help="output directory (default: <run>/rerun)")
    rr.add_argument("--jobs", type=int, default=None, metavar="K")
    rr.add_argument("--check", action="store_true",
                    help="exit 1 unless every output digest matches the manifest")
    return parser


def _default_out(command: str, sub: str | None) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / (command if sub is None else f"{command}-{sub}")


def _jobs(requested: int | None) -> int:
    if requested is not None:
        if requested < 1:
            raise ConfigError("--jobs must be at least 1")
        return requested
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def execute(command: str, sub: str | None, cfg: RunConfig, out_dir: Path, jobs: int,
            waive: list[str], resolution_doubling: bool) -> tuple[int, dict]:
    """Run one subcommand; writes outputs and the manifest and returns (exit code, manifest)."""
    handler = HANDLERS[(command, sub)]
    t0 = time.perf_counter()
    outcome = handler(Context(cfg, jobs, resolution_doubling))
    wall = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name in sorted(outcome.outputs):
        path = out_dir / name
        aio.atomic_write_bytes(path, outcome.outputs[name])
        digests[name] = aio.sha256_file(path)
    unknown = sorted(set(waive) - set(outcome.flags))
    failed = sorted(k for k, v in outcome.flags.items() if not v and k not in waive)
    manifest = {
        "command": command,
        "subcommand": sub,
        "config": cfg.snapshot(),
        "artifact_version": __version__,
        "wall_clock_seconds": wall,
        "seed": cfg["solver.seed"],
        "resolution_doubling": resolution_doubling,
        "waived": sorted(waive),
        "unknown_waivers": unknown,
        "outputs": digests,
        "validation": {"flags": outcome.flags, "failed": failed, "passed": not failed},
    }
    aio.write_json(out_dir / "manifest.json", manifest)
    return (EXIT_VALIDATION if failed else EXIT_OK), manifest


def _report(code: int, manifest: dict, out_dir: Path) -> None:
    val = manifest["validation"]
    status = "ok" if code == EXIT_OK else "validation failed: " + ", ".join(val["failed"])
    print(f"{manifest['command']} {manifest['subcommand'] or ''}".strip() + f": {status}")
    print(f"outputs in {out_dir}")


def _rerun(args) -> int:
    manifest_path = Path(args.manifest)
    old = aio.read_json(manifest_path)
    cfg = from_mapping(old["config"], str(manifest_path))
    out_dir = Path(args.out) if args.out else manifest_path.parent / "rerun"
    code, new = execute(old["command"], old["subcommand"], cfg, out_dir, _jobs(args.jobs),
                        old.get("waived", []), bool(old.get("resolution_doubling")))
    _report(code, new, out_dir)
    if args.check:
        same = new["outputs"] == old["outputs"]
        print("digests match" if same else "digests differ")
        if not same:
            return EXIT_VALIDATION
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            return _rerun(args)
        sub = getattr(args, "sub", None)
        cfg = load_config(args.config) if args.config else parse_config("", "<defaults>")
        overrides: dict[str, Any] = {}
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides["solver.seed"] = args.seed
        if args.out:
            overrides["output.dir"] = args.out
        cfg = cfg.with_overrides(overrides)
        cfg.solver_options()
        out_dir = Path(cfg["output.dir"]) if cfg["output.dir"] else _default_out(args.command, sub)
        code, manifest = execute(args.command, sub, cfg, out_dir, _jobs(args.jobs), args.waive,
                                 args.resolution_doubling)
        _report(code, manifest, out_dir)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except GridError as exc:
        print(f"grid error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
