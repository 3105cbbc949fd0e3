"""Persistence: field binaries, JSON sidecars, tidy CSV and atomic writes.

Field binary layout (little endian)::

    magic   4 bytes  b"AFLD"
    version uint32   1
    dim     uint32
    n       uint32   points per axis
    L       float64  half-width
    repr    uint32   0 physical, 1 fourier
    ncar    uint32   number of carrier components (0 or dim)
    carrier ncar x float64
    values  n**dim x (re float64, im float64), row-major lattice order
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _io
import json
import math
import os
import struct
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .spectral import FOURIER, PHYSICAL, Field, make_grid, sobolev_norms

MAGIC = b"AFLD"
FORMAT_VERSION = 1
HISTORY_LIMIT = 1000
_HEADER = struct.Struct("<4sIIIdII")
_REPR_CODE = {PHYSICAL: 0, FOURIER: 1}


# -- atomic writes -----------------------------------------------------------------

def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a sibling temporary file and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- JSON ------------------------------------------------------------------------

def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars, tuples, dataclasses and non-finite floats.

    NaN and infinities become ``None`` so the output is strict JSON.
    """
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Field):
        return {"grid": [obj.grid.dim, obj.grid.half_width, obj.grid.n],
                "representation": obj.representation}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    return repr(obj)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | os.PathLike, obj: Any) -> None:
    atomic_write_bytes(path, dumps(obj).encode())


def read_json(path: str | os.PathLike) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- CSV -------------------------------------------------------------------------

def _cell(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ""
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    atomic_write_bytes(path, csv_text(header, rows).encode())


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- fields ----------------------------------------------------------------------

def field_bytes(field: Field) -> bytes:
    g = field.grid
    carrier = field.carrier or ()
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, g.dim, g.n, float(g.half_width),
                        _REPR_CODE[field.representation], len(carrier))
    car = struct.pack(f"<{len(carrier)}d", *carrier)
    body = np.ascontiguousarray(field.values, dtype="<c16").tobytes(order="C")
    return head + car + body


def field_from_bytes(data: bytes) -> Field:
    magic, version, dim, n, L, code, ncar = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("not a field file")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported field format version {version}")
    off = _HEADER.size
    carrier = struct.unpack_from(f"<{ncar}d", data, off) if ncar else None
    off += 8 * ncar
    grid = make_grid(dim, L, n)
    vals = np.frombuffer(data, dtype="<c16", offset=off)
    if vals.size != grid.size:
        raise ValueError("field payload size does not match header")
    rep = {v: k for k, v in _REPR_CODE.items()}[code]
    return Field(grid, vals.reshape(grid.shape), rep, carrier)


def write_field(path: str | os.PathLike, field: Field) -> None:
    atomic_write_bytes(path, field_bytes(field))


def read_field(path: str | os.PathLike) -> Field:
    return field_from_bytes(Path(path).read_bytes())


def field_sidecar(field: Field, provenance: dict | None = None) -> dict:
    n = sobolev_norms(field)
    g = field.grid
    return {
        "grid": {"dim": g.dim, "L": g.half_width, "n": g.n},
        "representation": field.representation,
        "carrier": list(field.carrier) if field.carrier else None,
        "norms": {"mass": n.mass, "grad2": n.grad2, "bilap2": n.bilap2, "shifted2": n.shifted2},
        "tail_fraction": field.tail_fraction,
        "spectral_tail": field.spectral_tail,
        "provenance": provenance or {},
    }


def save_field(stem: str | os.PathLike, field: Field, provenance: dict | None = None) -> list[Path]:
    """Write ``stem.field`` and ``stem.field.json``; returns both paths."""
    stem = Path(stem)
    bin_path = stem.with_name(stem.name + ".field")
    side = stem.with_name(stem.name + ".field.json")
    write_field(bin_path, field)
    write_json(side, field_sidecar(field, provenance))
    return [bin_path, side]


# -- solver results ----------------------------------------------------------------

def downsample_history(history: Sequence, limit: int = HISTORY_LIMIT) -> list:
    """Keep at most ``limit`` entries, always including the first and the last."""
    hist = list(history)
    if len(hist) <= limit:
        return hist
    idx = np.unique(np.linspace(0, len(hist) - 1, limit).round().astype(int))
    return [hist[i] for i in idx]


def _plain_extra(extra: dict) -> dict:
    out = {}
    for k, v in extra.items():
        if isinstance(v, Field):
            continue
        out[k] = v
    return out


def result_record(res) -> dict:
    p = res.params
    return {
        "problem": res.problem,
        "params": {"dim": p.dim, "sigma": p.sigma, "c": p.c, "mass": p.mass},
        "value": res.value,
        "multiplier": res.multiplier,
        "residuals": dict(res.residuals),
        "residual_max": res.residual_max,
        "iterations": res.iterations,
        "converged": res.converged,
        "degenerate": res.degenerate_flag,
        "start": res.start,
        "seed": res.seed,
        "gauge_shift": list(res.gauge_shift),
        "grid": {"dim": res.field.grid.dim, "L": res.field.grid.half_width, "n": res.field.grid.n},
        "history": downsample_history(res.history),
        "extra": _plain_extra(res.extra),
    }


def save_result(stem: str | os.PathLike, res) -> list[Path]:
    """Persist a minimiser result as ``stem.json`` plus the field binary and sidecar."""
    stem = Path(stem)
    paths = save_field(stem, res.field, {"problem": res.problem, "seed": res.seed,
                                         "start": res.start})
    js = stem.with_name(stem.name + ".json")
    write_json(js, result_record(res))
    return [js] + paths
