"""Experiment configuration: JSON schema checks with field pointers.

A config is a JSON object::

    {
      "schema_version": 1,
      "params": {"c": 0, "beta": 0, "B": 1.5,
                 "nu": [], "mu": [{"kind": "atom", "params": {"loc": 1, "mass": 1}}]},
      "sets": {"A1": [[0.5, 1.5]], "A2": [[1.5, 2.5]]},
      "queries": [
        {"id": "q1", "kind": "survival", "x": 1, "sets": ["A1", "A2"], "times": [0.5, 1]},
        {"id": "q2", "kind": "survival", "x": [0, 1], "sets": ["A1"], "t_grid": [0, 2, 21]},
        {"id": "q3", "kind": "laplace", "x": 1, "t": 1, "lam0": 0, "sets": ["A1"], "lam": [10]}
      ],
      "mc": {"n": 100000, "seed": 1, "scheme": "exact", "dt": 0.001, "eps_trunc": 0},
      "oracle": {"lattice": true, "N": 400, "closed_form": "inhomogeneous_poisson"},
      "tolerances": {"oracle_abs": 1e-6, "mc_z": 3, "mc_abs": 5e-3},
      "solver": {"rel_tol": 1e-8, "abs_tol": 1e-10},
      "outputs": {"csv": "results.csv", "json": "report.json", "svg": "survival.svg"}
    }

Intervals are half-open ``(a, b]``; ``"inf"`` is accepted as an upper end.
A ``t_grid`` ``[start, stop, num]`` evaluates every set at the same time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .measures import JumpSet, component_from_record
from .measures import LevyMeasure
from .odeflow import SolverConfig
from .params import CbiParams

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class QuerySpec:
    id: str
    kind: str  # "survival" | "laplace"
    xs: tuple[float, ...]
    set_names: tuple[str, ...]
    sets: tuple[JumpSet, ...]
    time_rows: tuple[tuple[float, ...], ...]  # survival: one time per set; laplace: (t,)
    lam0: float = 0.0
    lam: tuple[float, ...] = ()


@dataclass(frozen=True)
class McSpec:
    n: int = 100_000
    seed: int = 0
    scheme: str = "exact"
    dt: float = 1e-3
    eps_trunc: float = 0.0


@dataclass(frozen=True)
class OracleSpec:
    lattice: bool = False
    N: int = 400
    closed_form: str | None = None


@dataclass(frozen=True)
class Tolerances:
    oracle_abs: float = 1e-6
    mc_z: float = 3.0
    mc_abs: float = 5e-3


@dataclass(frozen=True)
class ExperimentConfig:
    params: CbiParams
    sets: dict
    queries: tuple[QuerySpec, ...]
    mc: McSpec | None
    oracle: OracleSpec
    tolerances: Tolerances
    solver: SolverConfig
    outputs: dict = field(default_factory=dict)


def _num(v, path, lo=None, allow_inf=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    try:
        f = float(v)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {v!r}") from None
    if math.isnan(f) or (math.isinf(f) and not allow_inf):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if lo is not None and f < lo:
        raise ConfigError(path, f"must be >= {lo}, got {f}")
    return f


def _obj(v, path) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object")
    return v


def _list(v, path) -> list:
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list")
    return v


def _check_keys(d: dict, allowed, path):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}/{k}", "unknown field")


def _parse_set(v, path) -> JumpSet:
    pairs = []
    for i, iv in enumerate(_list(v, path)):
        ipath = f"{path}/{i}"
        if not isinstance(iv, list) or len(iv) != 2:
            raise ConfigError(ipath, "an interval is a pair [a, b]")
        a = _num(iv[0], f"{ipath}/0", lo=0.0)
        b = _num(iv[1], f"{ipath}/1", allow_inf=True)
        if not b > a:
            raise ConfigError(ipath, f"interval ({a}, {b}] is empty or reversed")
        pairs.append((a, b))
    try:
        return JumpSet(tuple(pairs))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_measure(v, path) -> LevyMeasure:
    comps = []
    for i, rec in enumerate(_list(v, path)):
        rpath = f"{path}/{i}"
        _obj(rec, rpath)
        if "support" in rec:
            _parse_set(rec["support"], f"{rpath}/support")
        try:
            comps.append(component_from_record(rec))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(rpath, f"bad measure record: {exc}") from None
    return LevyMeasure(tuple(comps))


def _parse_params(v, path) -> CbiParams:
    v = _obj(v, path)
    _check_keys(v, ("d", "c", "beta", "B", "nu", "mu"), path)
    if v.get("d", 1) != 1:
        raise ConfigError(f"{path}/d", "configs describe single-type parameters (d = 1)")
    return CbiParams.single(
        c=_num(v.get("c", 0.0), f"{path}/c"),
        beta=_num(v.get("beta", 0.0), f"{path}/beta"),
        B=_num(v.get("B", 0.0), f"{path}/B"),
        nu=_parse_measure(v.get("nu", []), f"{path}/nu"),
        mu=_parse_measure(v.get("mu", []), f"{path}/mu"),
    )


def _xs(v, path) -> tuple[float, ...]:
    if isinstance(v, list):
        if not v:
            raise ConfigError(path, "empty list")
        return tuple(_num(x, f"{path}/{i}", lo=0.0) for i, x in enumerate(v))
    return (_num(v, path, lo=0.0),)


def _grid(v, path) -> list[float]:
    v = _list(v, path)
    if len(v) != 3:
        raise ConfigError(path, "a grid is [start, stop, num]")
    a = _num(v[0], f"{path}/0", lo=0.0)
    b = _num(v[1], f"{path}/1", lo=a)
    n = v[2]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"{path}/2", "num must be a positive integer")
    return [float(t) for t in np.linspace(a, b, n)]


def _parse_query(q, path, sets) -> QuerySpec:
    q = _obj(q, path)
    _check_keys(q, ("id", "kind", "x", "sets", "times", "t_grid", "t", "lam0", "lam"), path)
    qid = str(q.get("id", path.rsplit("/", 1)[-1]))
    kind = q.get("kind")
    if kind not in ("survival", "laplace"):
        raise ConfigError(f"{path}/kind", "must be 'survival' or 'laplace'")
    xs = _xs(q.get("x", 1.0), f"{path}/x")
    names = _list(q.get("sets", []), f"{path}/sets")
    for i, nm in enumerate(names):
        if nm not in sets:
            raise ConfigError(f"{path}/sets/{i}", f"unknown set {nm!r}")
    jsets = tuple(sets[nm] for nm in names)
    if kind == "survival":
        if not names:
            raise ConfigError(f"{path}/sets", "survival queries need at least one set")
        if ("times" in q) == ("t_grid" in q):
            raise ConfigError(path, "give exactly one of 'times' and 't_grid'")
        if "times" in q:
            ts = _list(q["times"], f"{path}/times")
            if len(ts) != len(names):
                raise ConfigError(f"{path}/times", "need one time per set")
            rows = (tuple(_num(t, f"{path}/times/{i}", lo=0.0) for i, t in enumerate(ts)),)
        else:
            rows = tuple((t,) * len(names) for t in _grid(q["t_grid"], f"{path}/t_grid"))
        return QuerySpec(qid, kind, xs, tuple(names), jsets, rows)
    t = q.get("t", 1.0)
    if isinstance(t, list):
        rows = tuple((_num(v, f"{path}/t/{i}", lo=0.0),) for i, v in enumerate(t))
    else:
        rows = ((_num(t, f"{path}/t", lo=0.0),),)
    lam = _list(q.get("lam", [0.0] * len(names)), f"{path}/lam")
    if len(lam) != len(names):
        raise ConfigError(f"{path}/lam", "need one lam per set")
    lam = tuple(_num(l, f"{path}/lam/{i}", lo=0.0) for i, l in enumerate(lam))
    lam0 = _num(q.get("lam0", 0.0), f"{path}/lam0", lo=0.0)
    return QuerySpec(qid, kind, xs, tuple(names), jsets, rows, lam0, lam)


def parse_config(raw: Any) -> ExperimentConfig:
    root = _obj(raw, "")
    _check_keys(
        root,
        ("schema_version", "params", "sets", "queries", "mc", "oracle", "tolerances", "solver", "outputs"),
        "",
    )
    if root.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("/schema_version", f"expected {SCHEMA_VERSION}")
    if "params" not in root:
        raise ConfigError("/params", "missing")
    params = _parse_params(root["params"], "/params")
    sets = {
        str(k): _parse_set(v, f"/sets/{k}") for k, v in _obj(root.get("sets", {}), "/sets").items()
    }
    queries = tuple(
        _parse_query(q, f"/queries/{i}", sets) for i, q in enumerate(_list(root.get("queries", []), "/queries"))
    )
    ids = [q.id for q in queries]
    if len(set(ids)) != len(ids):
        raise ConfigError("/queries", "query ids must be unique")

    mc = None
    if "mc" in root:
        m = _obj(root["mc"], "/mc")
        _check_keys(m, ("n", "seed", "scheme", "dt", "eps_trunc"), "/mc")
        n = m.get("n", 100_000)
        if not isinstance(n, int) or isinstance(n, bool) or n < 100:
            raise ConfigError("/mc/n", "must be an integer >= 100")
        seed = m.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("/mc/seed", "must be a 64-bit nonnegative integer")
        scheme = m.get("scheme", "exact")
        if scheme not in ("exact", "euler"):
            raise ConfigError("/mc/scheme", "must be 'exact' or 'euler'")
        dt = _num(m.get("dt", 1e-3), "/mc/dt")
        if not dt > 0:
            raise ConfigError("/mc/dt", "must be positive")
        mc = McSpec(n, seed, scheme, dt, _num(m.get("eps_trunc", 0.0), "/mc/eps_trunc", lo=0.0))

    o = _obj(root.get("oracle", {}), "/oracle")
    _check_keys(o, ("lattice", "N", "closed_form"), "/oracle")
    N = o.get("N", 400)
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        raise ConfigError("/oracle/N", "must be a positive integer")
    oracle = OracleSpec(bool(o.get("lattice", False)), N, o.get("closed_form"))

    tl = _obj(root.get("tolerances", {}), "/tolerances")
    _check_keys(tl, ("oracle_abs", "mc_z", "mc_abs"), "/tolerances")
    tol = Tolerances(
        _num(tl.get("oracle_abs", 1e-6), "/tolerances/oracle_abs", lo=0.0),
        _num(tl.get("mc_z", 3.0), "/tolerances/mc_z", lo=0.0),
        _num(tl.get("mc_abs", 5e-3), "/tolerances/mc_abs", lo=0.0),
    )
    sv = _obj(root.get("solver", {}), "/solver")
    _check_keys(sv, ("rel_tol", "abs_tol", "max_step"), "/solver")
    try:
        solver = SolverConfig(
            rel_tol=_num(sv.get("rel_tol", 1e-8), "/solver/rel_tol"),
            abs_tol=_num(sv.get("abs_tol", 1e-10), "/solver/abs_tol"),
            max_step=_num(sv.get("max_step", math.inf), "/solver/max_step", allow_inf=True),
        )
    except ValueError as exc:
        raise ConfigError("/solver", str(exc)) from None
    outputs = _obj(root.get("outputs", {}), "/outputs")
    _check_keys(outputs, ("csv", "json", "svg"), "/outputs")
    return ExperimentConfig(params, sets, queries, mc, oracle, tol, solver, dict(outputs))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw)
