import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.config import SCHEMA, RunConfig, from_mapping, load_config, parse_config
from artifact.errors import ConfigError
from artifact.io import (atomic_write_bytes, csv_text, downsample_history, dumps, field_bytes,
                         field_from_bytes, read_csv, read_field, read_json, save_field,
                         sha256_file, to_jsonable, write_csv)
from artifact.minimizer import SolverOptions
from artifact.spectral import FOURIER, PHYSICAL, Field, make_grid, random_bandlimited


# -- field binaries --------------------------------------------------------------

@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2]), st.sampled_from([PHYSICAL, FOURIER]),
       st.booleans())
def test_field_binary_round_trip(seed, dim, rep, carrier):
    g = make_grid(dim, 9.5, 32 if dim == 2 else 128)
    u = random_bandlimited(g, np.random.default_rng(seed)).to(rep)
    if carrier:
        u = Field(g, u.values, rep, tuple(0.25 * (i + 1) for i in range(dim)))
    back = field_from_bytes(field_bytes(u))
    assert back.representation == rep
    assert back.carrier == u.carrier
    assert back.grid == g
    assert np.array_equal(back.values, u.values)


def test_field_files_and_sidecar(tmp_path):
    g = make_grid(1, 10.0, 64)
    u = Field.from_function(g, lambda x: np.exp(-x * x))
    paths = save_field(tmp_path / "u", u, {"note": "test"})
    assert [p.name for p in paths] == ["u.field", "u.field.json"]
    assert np.array_equal(read_field(paths[0]).values, u.values)
    side = read_json(paths[1])
    assert side["grid"] == {"dim": 1, "L": 10.0, "n": 64}
    assert side["norms"]["mass"] == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)


def test_field_rejects_bad_magic():
    with pytest.raises(ValueError):
        field_from_bytes(b"XXXX" + bytes(64))


# -- json / csv ------------------------------------------------------------------

def test_jsonable_values():
    obj = {"nan": math.nan, "inf": math.inf, "np": np.float64(1.5), "arr": np.arange(2),
           "frac": Fraction(2, 3), "opts": SolverOptions(seed=3)}
    out = json.loads(dumps(obj))
    assert out["nan"] is None and out["inf"] is None and out["np"] == 1.5
    assert out["arr"] == [0, 1]
    assert out["frac"] == "2/3"  # exact rationals stay exact
    assert out["opts"]["seed"] == 3


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": 2}) == dumps({"a": 2, "b": 1})


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["x", "flag", "y"], [(0.1, True, math.nan), (1e-300, False, 2.5)])
    header, rows = read_csv(path)
    assert header == ["x", "flag", "y"]
    assert rows == [["0.1", "true", ""], ["1e-300", "false", "2.5"]]
    assert float(rows[1][0]) == 1e-300


def test_csv_text_is_deterministic():
    assert csv_text(["a"], [(1.0,)]) == csv_text(["a"], [(1.0,)])


def test_atomic_write_and_digest(tmp_path):
    p = tmp_path / "d.bin"
    atomic_write_bytes(p, b"abc")
    assert p.read_bytes() == b"abc"
    assert sha256_file(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    assert list(tmp_path.iterdir()) == [p]


def test_history_downsampling_keeps_ends():
    hist = [(i, float(-i), 0.0) for i in range(5000)]
    out = downsample_history(hist, 1000)
    assert len(out) <= 1000 and out[0] == hist[0] and out[-1] == hist[-1]
    assert downsample_history(hist[:10]) == hist[:10]


# -- configuration ---------------------------------------------------------------

def test_parse_basic_config():
    cfg = parse_config("""
        # comment
        grid.dim = 1
        problem.sigma = 3/2      # fraction
        problem.values = 0.5, 1, 2
        solver.max_iter = 5000
        solver.conjugate = false
        functionals.profile = "knapp"
    """)
    assert cfg["problem.sigma"] == 1.5
    assert cfg["problem.values"] == [0.5, 1.0, 2.0]
    assert cfg["functionals.profile"] == "knapp"
    opts = cfg.solver_options()
    assert opts.max_iter == 5000 and opts.conjugate is False
    assert cfg["problem.c"] is None


@pytest.mark.parametrize("text,msg", [
    ("grid.bogus = 1", "unknown key"),
    ("grid.dim = 1\ngrid.dim = 2", "duplicate"),
    ("problem.sigma =", "empty value"),
    ("problem.sigma = abc", "not a number"),
    ("grid.dim = 4", "grid.dim"),
    ("grid.L = 10", "together"),
    ("grid.L = 10\ngrid.n = 100", "power of two"),
    ("problem.values = 1,,2", "empty list"),
    ("functionals.profile = sinc", "expected one of"),
    ("solver.preconditioner = jacobi", "preconditioner"),
    ("no equals sign", "key = value"),
    ("ineq.q = 2", "ineq.q"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_overrides_and_require():
    cfg = parse_config("problem.c = 2")
    assert cfg.with_overrides({"solver.seed": 7}).solver_options().seed == 7
    with pytest.raises(ConfigError):
        cfg.with_overrides({"nope": 1})
    with pytest.raises(ConfigError):
        cfg.require("problem.m")


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_render(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


config_values = st.fixed_dictionaries({}, optional={
    "grid.dim": st.sampled_from([1, 2, 3]),
    "problem.sigma": st.floats(0.1, 8.0),
    "problem.c": st.floats(1e-3, 1e3),
    "problem.values": st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=5),
    "ineq.kappa": st.lists(st.floats(0.01, 0.99), min_size=1, max_size=3),
    "solver.seed": st.integers(0, 2 ** 63),
    "solver.conjugate": st.booleans(),
    "solver.tol_residual": st.floats(1e-14, 1e-3),
    "constants.with_M": st.booleans(),
})


@given(config_values)
def test_config_round_trip(values):
    text = "\n".join(f"{k} = {_render(v)}" for k, v in values.items())
    cfg = parse_config(text)
    assert cfg.snapshot() == dict(sorted(values.items()))
    again = from_mapping(json.loads(dumps(cfg.snapshot())))
    assert again.snapshot() == cfg.snapshot()


def test_schema_covers_solver_options():
    for name in SolverOptions.__dataclass_fields__:
        assert f"solver.{name}" in SCHEMA
