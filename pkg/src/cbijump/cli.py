"""Command line entry point: ``cbi validate|eval|simulate|compare|plot``.

Exit codes: 0 success, 1 a comparison failed, 2 configuration error,
3 numerical failure (solver, oracle or simulator).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from . import laws, oracle, simkit
from .config import SCHEMA_VERSION, ExperimentConfig, QuerySpec, load_config
from .errors import CbiError, ConfigError
from .params import validate

EXIT_OK, EXIT_COMPARE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

BASE_COLUMNS = ["query_id", "kind", "x", "times", "log_value", "value"]
SIM_COLUMNS = ["query_id", "kind", "x", "times", "n", "seed", "scheme", "mc_mean", "mc_std", "mc_half_width"]
COMPARE_COLUMNS = BASE_COLUMNS + [
    "mc_mean",
    "mc_half_width",
    "mc_pass",
    "oracle_kind",
    "oracle_value",
    "oracle_bound",
    "oracle_pass",
    "pass",
]


def fmt(v) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v + 0.0, ".17g")  # no negative zero
    return str(v)


def fmt_times(ts) -> str:
    return ";".join(format(float(t) + 0.0, ".17g") for t in ts)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _rows(q: QuerySpec):
    for x in q.xs:
        for ts in q.time_rows:
            yield x, ts


def _analytic(cfg: ExperimentConfig, q: QuerySpec, x: float, ts) -> laws.LawValue:
    if q.kind == "survival":
        return laws.survival_joint(cfg.params, x, list(zip(q.sets, ts)), cfg.solver)
    return laws.laplace_state_and_counts(cfg.params, x, ts[0], q.lam0, q.sets, q.lam, cfg.solver)


def _mc_query(q: QuerySpec, ts):
    if q.kind == "survival":
        return "joint_survival", simkit.SurvivalQuery(tuple(zip(q.sets, ts)))
    return "laplace", simkit.LaplaceQuery(ts[0], q.lam0, q.sets, q.lam)


def _mc(cfg: ExperimentConfig, q: QuerySpec, x: float, ts, workers) -> simkit.McEstimate:
    kind, query = _mc_query(q, ts)
    m = cfg.mc
    return simkit.mc_estimate(
        kind, cfg.params, x, query, m.n, m.seed, m.scheme, m.dt, m.eps_trunc, workers, cfg.tolerances.mc_z
    )


def _oracle(cfg: ExperimentConfig, q: QuerySpec, x: float, ts):
    """(kind, value, bound) or None when no oracle applies."""
    if q.kind != "survival":
        return None
    if cfg.oracle.closed_form and len(set(ts)) == 1:
        from .mechanisms import union_of

        val = oracle.closed_form_survival(cfg.oracle.closed_form, cfg.params, x, ts[0], union_of(q.sets))
        return "closed_form:" + cfg.oracle.closed_form, val, 0.0
    if cfg.oracle.lattice:
        spec = oracle.LatticeSpec.for_params(cfg.params, x, N=cfg.oracle.N)
        order = sorted(range(len(ts)), key=lambda i: ts[i])
        res = oracle.ctmc_survival(spec, cfg.params, x, [(q.sets[i], ts[i]) for i in order])
        return "lattice", res.value, res.bound
    return None


def run_eval(cfg):
    rows = []
    for q in cfg.queries:
        for x, ts in _rows(q):
            lv = _analytic(cfg, q, x, ts)
            rows.append({"query_id": q.id, "kind": q.kind, "x": x, "times": ts,
                         "log_value": lv.log_value, "value": lv.value})
    return rows, True


def run_simulate(cfg, workers):
    if cfg.mc is None:
        raise ConfigError("/mc", "simulate needs an 'mc' record")
    rows = []
    for q in cfg.queries:
        for x, ts in _rows(q):
            est = _mc(cfg, q, x, ts, workers)
            rows.append({"query_id": q.id, "kind": q.kind, "x": x, "times": ts, "n": est.n,
                         "seed": est.seed, "scheme": est.scheme, "mc_mean": est.mean,
                         "mc_std": est.std, "mc_half_width": est.half_width})
    return rows, True


def run_compare(cfg, workers):
    tol = cfg.tolerances
    rows = []
    all_pass = True
    for q in cfg.queries:
        for x, ts in _rows(q):
            lv = _analytic(cfg, q, x, ts)
            row = {"query_id": q.id, "kind": q.kind, "x": x, "times": ts,
                   "log_value": lv.log_value, "value": lv.value}
            ok = True
            if cfg.mc is not None:
                est = _mc(cfg, q, x, ts, workers)
                diff = abs(est.mean - lv.value)
                mc_ok = diff <= est.half_width and diff <= tol.mc_abs
                row.update(mc_mean=est.mean, mc_half_width=est.half_width, mc_pass=mc_ok)
                ok &= mc_ok
            orc = _oracle(cfg, q, x, ts)
            if orc is not None:
                kind, val, bound = orc
                o_ok = abs(val - lv.value) <= tol.oracle_abs + bound
                row.update(oracle_kind=kind, oracle_value=val, oracle_bound=bound, oracle_pass=o_ok)
                ok &= o_ok
            row["pass"] = ok
            all_pass &= ok
            rows.append(row)
    return rows, all_pass


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt_times(r[c]) if c == "times" else fmt(r.get(c)) for c in columns])


def _jsonable(r: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in r.items()}


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def survival_svg(series, width=640, height=400) -> str:
    """Deterministic SVG line chart; ``series`` is a list of (label, [(t, value), ...])."""
    left, right, top, bottom = 60, 160, 20, 45
    pw, ph = width - left - right, height - top - bottom
    ts = [t for _, pts in series for t, _ in pts] or [0.0, 1.0]
    t_lo, t_hi = min(ts), max(ts)
    if t_hi == t_lo:
        t_hi = t_lo + 1.0

    def X(t):
        return left + pw * (t - t_lo) / (t_hi - t_lo)

    def Y(v):
        return top + ph * (1.0 - v)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(6):
        v = k / 5
        out.append(f'<text x="{left - 6}" y="{Y(v) + 4:.2f}" font-size="11" text-anchor="end">{v:.1f}</text>')
        t = t_lo + (t_hi - t_lo) * k / 5
        out.append(
            f'<text x="{X(t):.2f}" y="{top + ph + 16}" font-size="11" text-anchor="middle">{t:.3g}</text>'
        )
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 8}" font-size="12" text-anchor="middle">t</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2:.2f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:.2f})">survival</text>'
    )
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        path = " ".join(f"{X(t):.3f},{Y(v):.3f}" for t, v in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def run_plot(cfg):
    series = []
    rows = []
    for q in cfg.queries:
        if q.kind != "survival":
            continue
        for x in q.xs:
            pts = []
            for ts in q.time_rows:
                lv = _analytic(cfg, q, x, ts)
                pts.append((max(ts), lv.value))
                rows.append({"query_id": q.id, "kind": q.kind, "x": x, "times": ts,
                             "log_value": lv.log_value, "value": lv.value})
            series.append((f"{q.id} x={x:g}", sorted(pts)))
    return rows, series


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbi", description="Jump-time laws of CBI processes")
    ap.add_argument("command", choices=["validate", "eval", "simulate", "compare", "plot"])
    ap.add_argument("--config", required=True, help="experiment JSON file")
    ap.add_argument("--seed", type=int, default=None, help="override mc.seed")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--workers", type=int, default=None,
                    help=f"Monte Carlo worker processes (default: ${simkit.WORKERS_ENV} or 1)")
    return ap


def _out_path(cfg, args, key, default):
    return os.path.join(args.out, cfg.outputs.get(key, default))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if cfg.mc is None:
                raise ConfigError("/mc", "--seed given but the config has no 'mc' record")
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", "must be a 64-bit nonnegative integer")
            cfg = replace(cfg, mc=replace(cfg.mc, seed=args.seed))
        os.makedirs(args.out, exist_ok=True)
        cmd = args.command
        payload = {"schema_version": SCHEMA_VERSION, "command": cmd}
        code = EXIT_OK
        if cmd == "validate":
            rep = validate(cfg.params)
            payload.update(params=cfg.params.to_json(), validation=rep.to_json(),
                           admissible=rep.admissible, first_moment_ok=rep.first_moment_ok)
            code = EXIT_OK if rep.admissible else EXIT_CONFIG
        elif cmd == "eval":
            rows, _ = run_eval(cfg)
            write_csv(_out_path(cfg, args, "csv", "eval.csv"), BASE_COLUMNS, rows)
            payload["rows"] = [_jsonable(r) for r in rows]
        elif cmd == "simulate":
            rows, _ = run_simulate(cfg, args.workers)
            write_csv(_out_path(cfg, args, "csv", "simulate.csv"), SIM_COLUMNS, rows)
            payload["rows"] = [_jsonable(r) for r in rows]
        elif cmd == "compare":
            rows, ok = run_compare(cfg, args.workers)
            write_csv(_out_path(cfg, args, "csv", "compare.csv"), COMPARE_COLUMNS, rows)
            payload["rows"] = [_jsonable(r) for r in rows]
            payload["tolerances"] = {"oracle_abs": cfg.tolerances.oracle_abs,
                                     "mc_z": cfg.tolerances.mc_z, "mc_abs": cfg.tolerances.mc_abs}
            payload["all_pass"] = ok
            code = EXIT_OK if ok else EXIT_COMPARE
        else:
            rows, series = run_plot(cfg)
            with open(_out_path(cfg, args, "svg", "survival.svg"), "w") as fh:
                fh.write(survival_svg(series))
            write_csv(_out_path(cfg, args, "csv", "plot.csv"), BASE_COLUMNS, rows)
            payload["rows"] = [_jsonable(r) for r in rows]
        write_json(_out_path(cfg, args, "json", f"{cmd}.json"), payload)
        print(f"cbi {cmd}: exit {code}", file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CbiError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
