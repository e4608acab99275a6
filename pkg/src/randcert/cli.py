"""Command-line front end: bound curves, witness comparisons, optimizer tables and checks.

Every output starts with a provenance block (seed, tolerances, versions and
the witness domain).  CSV carries it as ``#`` comment lines, JSON under the
``provenance`` key next to ``"schema": "1"``.  Nothing time-dependent is
written, so equal inputs give byte-identical files.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 infeasible witness or solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .behavior import WitnessKind, WitnessSpec, guessing_probability, min_entropy, witness_value
from .bounds import BoundModel, DomainError, bound_domain, guaranteed_bound
from .quantum import behavior_from_params
from .sdp.guaranteed import InfeasibleWitnessError, di_guaranteed, witness_domain
from .sdp.npa import Level
from .sdp.solver import SdpStatus, SolverOptions
from .vertices import catalog

__all__ = ["main", "build_parser", "compare_rows", "OUTPUT_DIR_ENV", "EXIT_OK", "EXIT_VERIFY", "EXIT_CONFIG", "EXIT_SOLVER"]

OUTPUT_DIR_ENV = "RANDCERT_OUTPUT_DIR"
SCHEMA = "1"
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
LEVELS = ("L0", "L1", "L1ab")


class ConfigError(ValueError):
    pass


def _sig(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def _r4(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) and math.isfinite(v) else ""


# ---------------------------------------------------------------------------
# output


def _provenance(args, extra: dict) -> dict:
    from .optimize.auglag import CONSTRAINT_TOL

    prov = {
        "tool": "randcert",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "command": args.command,
        "seed": args.seed,
        "tolerances": {"sdp_gap": SolverOptions().gap_tol, "constraint": CONSTRAINT_TOL},
    }
    prov.update(extra)
    return prov


def _emit(args, stdout, columns, rows, prov: dict, decimals: dict | None = None) -> None:
    """Write rows as CSV (10 significant digits plus 4-decimal columns) or JSON."""
    decimals = decimals or {}
    if args.format == "json":
        doc = {"schema": SCHEMA, "provenance": prov, "columns": list(columns), "rows": rows}
        text = json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        for k, v in prov.items():
            buf.write(f"# {k}: {json.dumps(v, default=_json_default)}\n")
        w = csv.writer(buf, lineterminator="\n")
        header = []
        for c in columns:
            header.append(c)
            if c in decimals:
                header.append(decimals[c])
        w.writerow(header)
        for r in rows:
            line = []
            for c in columns:
                line.append(_sig(r.get(c, "")))
                if c in decimals:
                    line.append(_r4(r.get(c)))
            w.writerow(line)
        text = buf.getvalue()
    target = _target_path(args)
    if target is None:
        stdout.write(text)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _target_path(args) -> Path | None:
    if args.out:
        return Path(args.out)
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root:
        return Path(root) / f"{args.command}.{args.format}"
    return None


# ---------------------------------------------------------------------------
# argument helpers


def _values(args, lo: float, hi: float) -> np.ndarray:
    if args.value is not None:
        return np.array(args.value, dtype=float)
    if args.range is not None:
        a, b, n = args.range
        n = int(n)
        if n < 2 or not (math.isfinite(a) and math.isfinite(b)):
            raise ConfigError("--range needs finite bounds and at least 2 points")
        return np.linspace(a, b, n)
    return np.linspace(lo, hi, 60)


def _witness(args) -> WitnessKind:
    try:
        return WitnessKind.parse(args.witness)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sdp_options(args) -> SolverOptions | None:
    cap = getattr(args, "sdp_max_iter", None)
    return None if cap is None else SolverOptions(max_iter=cap)


# ---------------------------------------------------------------------------
# commands


def cmd_curve(args, stdout) -> int:
    """Bound curve for one witness from a closed-form model or an SDP level."""
    kind = _witness(args)
    if args.model:
        try:
            model = BoundModel.parse(args.model)
            lo, hi = bound_domain(model, kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        values = _values(args, lo, hi)
        rows = []
        for v in values:
            bits = guaranteed_bound(model, WitnessSpec(kind, float(v)))
            rows.append({"witness_value": float(v), "bits": bits})
        prov = _provenance(args, {"witness": kind.value, "model": model.value, "domain": [lo, hi]})
        _emit(args, stdout, ["witness_value", "bits"], rows, prov, {"bits": "bits_4dp"})
        return EXIT_OK
    level = Level.parse(args.level)
    lo, hi = witness_domain(kind, level)
    values = _values(args, lo, hi)
    rows = []
    failed = False
    for v in values:
        w = WitnessSpec(kind, float(v))
        try:
            r = di_guaranteed(w, level, _sdp_options(args))
            rows.append({
                "witness_value": float(v), "bits": r.bits, "level": level.value, "argmax_cell": r.cell_label,
                "duality_gap": float(r.duality_gap), "status": r.status.value,
            })
            failed |= r.status is not SdpStatus.OPTIMAL
        except InfeasibleWitnessError:
            rows.append({"witness_value": float(v), "bits": float("nan"), "level": level.value, "status": "Infeasible"})
            failed = True
    prov = _provenance(args, {"witness": kind.value, "level": level.value, "domain": [lo, hi]})
    cols = ["witness_value", "bits", "level", "argmax_cell", "duality_gap", "status"]
    _emit(args, stdout, cols, rows, prov, {"bits": "bits_4dp"})
    return EXIT_SOLVER if failed else EXIT_OK


def compare_rows(chsh_values, level: Level = Level.L1AB, options: SolverOptions | None = None) -> list[dict]:
    """SDP bounds for CHSH ``B`` and for Hardy and CL at ``P = (B - 2) / 4``."""
    rows = []
    for b in chsh_values:
        b = float(b)
        p = (b - 2) / 4
        row = {"chsh": b, "p": p, "status": "ok"}
        for key, w in (
            ("bits_hardy", WitnessSpec(WitnessKind.HARDY, p)),
            ("bits_cl", WitnessSpec(WitnessKind.CL, p)),
            ("bits_chsh", WitnessSpec(WitnessKind.CHSH, b)),
        ):
            try:
                r = di_guaranteed(w, level, options)
                row[key] = r.bits
                if r.status is not SdpStatus.OPTIMAL:
                    row["status"] = r.status.value
            except InfeasibleWitnessError:
                row[key] = float("nan")
                row["status"] = "Infeasible"
        rows.append(row)
    return rows


def cmd_compare(args, stdout) -> int:
    from .quantum import HARDY_MAX

    level = Level.parse(args.level)
    values = _values(args, 2.0, 2 + 4 * HARDY_MAX)
    if args.value is None and args.range is None:
        values = values[1:]
    rows = compare_rows(values, level, _sdp_options(args))
    prov = _provenance(args, {"level": level.value, "domain": [2.0, 2 + 4 * HARDY_MAX], "map": "P = (B - 2) / 4"})
    cols = ["chsh", "p", "bits_hardy", "bits_cl", "bits_chsh", "status"]
    _emit(args, stdout, cols, rows, prov, {"bits_hardy": "hardy_4dp", "bits_cl": "cl_4dp", "bits_chsh": "chsh_4dp"})
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_SOLVER


def cmd_tables(args, stdout) -> int:
    """The four optimizer table rows; rows off their printed value are flagged, not fatal."""
    from .acceptance import TABLE_ROWS
    from .optimize.randomness import PARAM_NAMES, max_dd_randomness

    rows = []
    for label, kind, v, printed in TABLE_ROWS:
        out = max_dd_randomness(WitnessSpec(kind, v), starts=args.starts, seed=args.seed)
        row = {
            "row": label, "witness": kind.value, "witness_value": v, "printed_bits": printed,
            "bits": out.best_value, "pair": "X{}Y{}".format(*(i + 1 for i in out.extra["pair"])),
            "residual_max": out.max_residual, "converged": out.converged,
        }
        row.update({n: float(x) for n, x in zip(PARAM_NAMES, out.params)})
        row["within_tol"] = bool(out.converged and abs(out.best_value - printed) <= 5e-3)
        rows.append(row)
    prov = _provenance(args, {"starts": args.starts or "default", "tolerance_bits": 5e-3, "domain": "quantum"})
    cols = ["row", "witness", "witness_value", "printed_bits", "bits", "pair", *PARAM_NAMES, "residual_max", "converged", "within_tol"]
    _emit(args, stdout, cols, rows, prov, {"bits": "bits_4dp"})
    return EXIT_OK


def cmd_scan(args, stdout) -> int:
    from .optimize.extremal import extremal_scan, write_scan_csv

    kind = _witness(args)
    if kind is WitnessKind.CHSH:
        raise ConfigError("scan needs --witness Hardy or CL")
    pts = extremal_scan(kind, samples=args.samples, seed=args.seed)
    prov = _provenance(args, {"witness": kind.value, "samples": args.samples, "extremality_tol": 1e-4})
    if args.format == "csv":
        text = "".join(f"# {k}: {json.dumps(v)}\n" for k, v in prov.items()) + write_scan_csv(pts, kind)
        target = _target_path(args)
        if target is None:
            stdout.write(text)
        else:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text)
        return EXIT_OK
    rows = [
        {"witness_value": p.witness_value, "r_max_bits": p.r_max_bits, "r_guaranteed_bits": p.r_guaranteed_bits,
         "weights": p.weights, "params": p.params, "residual_max": abs(p.equality_residual)}
        for p in pts
    ]
    _emit(args, stdout, list(rows[0]) if rows else [], rows, prov)
    return EXIT_OK


def cmd_verify(args, stdout) -> int:
    from .acceptance import format_line, run_all

    opts = {}
    if args.starts:
        opts["starts"] = args.starts
    results = run_all(args.criteria, _sdp_options(args), seed=args.seed, **opts)
    for r in results:
        print(format_line(r), file=sys.stderr)
    doc = {"schema": SCHEMA, "provenance": _provenance(args, {}), "criteria": [r.as_dict() for r in results],
           "passed": all(r.passed for r in results)}
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    target = _target_path(args)
    if target is None:
        stdout.write(text)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


def cmd_eval(args, stdout) -> int:
    """Behavior, witnesses and min-entropies for a state amplitude and eight Bloch angles."""
    if args.angles is None or len(args.angles) != 8:
        raise ConfigError("--angles needs eight values: theta_x1 theta_x2 theta_y1 theta_y2 phi_x1 phi_x2 phi_y1 phi_y2")
    if not 0.0 <= args.alpha <= 1.0:
        raise ConfigError("--alpha must lie in [0, 1]")
    b = behavior_from_params(np.append(args.angles, args.alpha), args.sign)
    row = {f"P({'+' if a == 1 else '-'}{'+' if c == 1 else '-'}|{x + 1}{y + 1})": float(b.table[x, y, ia, ic])
           for x in (0, 1) for y in (0, 1) for ia, a in enumerate((1, -1)) for ic, c in enumerate((1, -1))}
    for kind in WitnessKind:
        row[kind.value] = witness_value(b, kind).value
    for x in (0, 1):
        for y in (0, 1):
            row[f"H_min(X{x + 1}Y{y + 1})"] = min_entropy(b, x, y)
    row["guessing_probability"] = guessing_probability(b)[0]
    prov = _provenance(args, {"alpha": args.alpha, "sign": args.sign, "domain": "quantum"})
    _emit(args, stdout, list(row), [row], prov)
    return EXIT_OK


def cmd_vertices(args, stdout) -> int:
    cat = catalog()
    rows = []
    for v in cat.all():
        row = {"label": v.label}
        row.update({f"p{i}": float(p) for i, p in enumerate(v.probs)})
        for kind in WitnessKind:
            row[kind.value] = witness_value(v, kind).value
        rows.append(row)
    prov = _provenance(args, {"vertices": len(rows), "domain": "no-signalling polytope"})
    _emit(args, stdout, list(rows[0]), rows, prov)
    return EXIT_OK


COMMANDS = {
    "curve": cmd_curve,
    "compare": cmd_compare,
    "tables": cmd_tables,
    "scan": cmd_scan,
    "verify": cmd_verify,
    "eval": cmd_eval,
    "vertices": cmd_vertices,
}


def build_parser() -> argparse.ArgumentParser:
    from .optimize.randomness import DEFAULT_SEED

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--out", help=f"output file (default: ${OUTPUT_DIR_ENV}/<command>.<format>, else stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    witness = argparse.ArgumentParser(add_help=False)
    witness.add_argument("--witness", default="CHSH", help="CHSH, Hardy or CL")
    grid = argparse.ArgumentParser(add_help=False)
    g = grid.add_mutually_exclusive_group()
    g.add_argument("--value", type=float, nargs="+", help="explicit witness values")
    g.add_argument("--range", type=float, nargs=3, metavar=("LO", "HI", "N"), help="N evenly spaced values")

    p = argparse.ArgumentParser(prog="randcert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("curve", parents=[common, witness, grid], help="bound curve")
    c.add_argument("--model", help="closed-form model, e.g. NS, Q_Case2_Varying, Hardy_Convex")
    c.add_argument("--level", choices=LEVELS, default="L1ab", help="SDP level when no --model is given")
    c.add_argument("--sdp-max-iter", type=int)
    c = sub.add_parser("compare", parents=[common, grid], help="Hardy, CL and CHSH SDP bounds against B")
    c.add_argument("--level", choices=LEVELS, default="L1ab")
    c.add_argument("--sdp-max-iter", type=int)
    c = sub.add_parser("tables", parents=[common], help="optimizer table rows")
    c.add_argument("--starts", type=int, help="multistart count (default per witness)")
    c = sub.add_parser("scan", parents=[common, witness], help="extremal scan")
    c.add_argument("--samples", type=int, default=500)
    c = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    c.add_argument("--criteria", type=int, nargs="+", help="subset of criteria numbers")
    c.add_argument("--sdp-max-iter", type=int, help="iteration cap for every SDP")
    c.add_argument("--starts", type=int, help="override optimizer start counts")
    c = sub.add_parser("eval", parents=[common], help="behavior of a state and measurement angles")
    c.add_argument("--alpha", type=float, required=True, help="amplitude of |01>")
    c.add_argument("--angles", type=float, nargs=8)
    c.add_argument("--sign", type=int, choices=(1, -1), default=-1, help="relative sign of the |10> term")
    sub.add_parser("vertices", parents=[common], help="the 24 no-signalling vertices")
    return p


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args, stdout)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleWitnessError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
