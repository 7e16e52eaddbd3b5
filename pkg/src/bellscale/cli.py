"""Command-line entry point: ``bellscale <subcommand> [flags]``.

Exit codes: 0 success, 1 bad input, 2 a numerical assertion failed
(sign calibration ambiguity, power-iteration non-convergence).
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import operator
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from bellscale.bell_core import (
    BellExpression,
    MeasurementSettings,
    build_bell_expression,
    canonical_settings,
    canonical_sign,
)
from bellscale.entanglement import (
    n_tangle,
    nonlocality_tangle_relation,
    scan_alpha,
    violation_threshold,
)
from bellscale.errors import BellError, CalibrationError, ConvergenceError
from bellscale.lhv import DEFAULT_CAP, lhv_max, lhv_sample
from bellscale.optimizer import MODES, calibrate_sign, optimize_settings
from bellscale.quantum_engine import (
    StateVector,
    bell_pauli_expansion,
    expectation,
    make_ghz,
    make_gghz,
    make_slice,
    max_eigenvalue,
)

CSV_HEADER = [
    "alpha",
    "sin_2alpha",
    "tau",
    "bell_value",
    "two_sqrt_tau",
    "threshold_paper",
    "threshold_sg",
    "violation",
]

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise BellError(f"{self.prog}: {message}")


def fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.12g}"


def parse_angle(text: str) -> float:
    """Float or simple arithmetic over numbers and ``pi`` (e.g. ``3*pi/8``)."""

    def ev(node: ast.AST) -> float:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError

    try:
        return ev(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise BellError(f"cannot parse angle {text!r}; use a number or an expression like pi/8")


def parse_sign(text: str, n: int) -> int:
    if text == "auto":
        return canonical_sign(n)
    if text in ("+1", "1"):
        return 1
    if text == "-1":
        return -1
    raise BellError(f"--sign must be auto, +1 or -1, got {text!r}")


def parse_state(text: str, n: int) -> StateVector:
    kind, _, arg = text.partition(":")
    if kind == "ghz" and not arg:
        return make_ghz(n)
    if kind == "gghz" and arg:
        return make_gghz(n, parse_angle(arg))
    if kind == "slice" and arg:
        if n != 4:
            raise BellError(f"slice states have n=4, got --n {n}")
        angles = [parse_angle(a) for a in arg.split(",")]
        if len(angles) != 4:
            raise BellError("slice state needs four angles: slice:a,b,c,d")
        return make_slice(*angles)
    raise BellError(f"unknown state {text!r}; use ghz, gghz:alpha or slice:a,b,c,d")


def load_settings(spec: str, n: int) -> MeasurementSettings:
    if spec == "canonical":
        return canonical_settings(n)
    try:
        data = json.loads(Path(spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BellError(f"cannot read settings file {spec!r}: {exc}") from exc
    settings = MeasurementSettings.from_vectors(data)
    if settings.n != n:
        raise BellError(f"settings file covers {settings.n} sites, expected {n}")
    return settings


def load_expression(path: str) -> BellExpression:
    try:
        return BellExpression.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise BellError(f"cannot read expression file {path!r}: {exc}") from exc


def _emit(payload: dict[str, Any], as_json: bool, lines: Sequence[str], out=None) -> None:
    out = out or sys.stdout
    if as_json:
        json.dump(payload, out, indent=2)
        out.write("\n")
    else:
        for line in lines:
            out.write(line + "\n")


def _n(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise BellError(f"--n must be an integer, got {text!r}")
    if n < 2:
        raise BellError(f"--n must be >= 2, got {n}")
    return n


def cmd_build(args) -> int:
    expr = build_bell_expression(args.n, parse_sign(args.sign, args.n), args.leader)
    payload = expr.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    lines = [f"n = {expr.n}, sign = {expr.sign:+d}, normalization = 2^-{expr.norm_exponent}"]
    for term in expr.terms:
        lines.append(f"  {'+' if term.coeff_sign > 0 else '-'} " + " ".join(
            f"A{site}_{k}" for site, k in enumerate(term.choice, start=1)
        ))
    lines.append(f"{len(expr.terms)} terms")
    _emit(payload, args.json, lines)
    return 0


def cmd_lhv(args) -> int:
    expr = build_bell_expression(args.n, parse_sign(args.sign, args.n))
    if args.n > args.cap:
        if not args.samples:
            raise BellError(
                f"n={args.n} exceeds the enumeration cap {args.cap}; "
                "raise --cap or pass --samples for a non-exhaustive lower bound"
            )
        result = lhv_sample(expr, args.samples, args.seed)
    else:
        result = lhv_max(expr, cap=args.cap, threads=args.threads)
    payload = {
        "n": expr.n,
        "sign": expr.sign,
        "max": str(result.max_value),
        "witness_index": result.witness.index,
        "exhaustive": result.exhaustive,
    }
    kind = "exhaustive" if result.exhaustive else "sampled lower bound"
    lines = [f"max = {result.max_value} ({kind}, {result.evaluated} strategies)"]
    _emit(payload, args.json, lines)
    return 0


def cmd_expect(args) -> int:
    if args.expr:
        expr = load_expression(args.expr)
        n = expr.n
    else:
        if args.n is None:
            raise BellError("expect needs --n or --expr")
        n = args.n
        expr = build_bell_expression(n, parse_sign(args.sign, n))
    settings = load_settings(args.settings, n)
    state = parse_state(args.state, n)
    value = expectation(expr, settings, state)
    payload = {"n": n, "sign": expr.sign, "state": args.state, "value": value}
    _emit(payload, args.json, [f"<B> = {fmt(value)}"])
    return 0


def cmd_eigen(args) -> int:
    expr = build_bell_expression(args.n, parse_sign(args.sign, args.n))
    settings = load_settings(args.settings, args.n)
    psum = bell_pauli_expansion(expr, settings)
    top = max_eigenvalue(psum, seed=args.seed)
    ghz = expectation(expr, settings, make_ghz(args.n))
    payload = {
        "n": args.n,
        "sign": expr.sign,
        "pauli_strings": len(psum.terms),
        "max_eigenvalue": top,
        "ghz_value": ghz,
    }
    lines = [
        f"Pauli strings = {len(psum.terms)}",
        f"max eigenvalue = {fmt(top)}",
        f"GHZ value = {fmt(ghz)}",
    ]
    _emit(payload, args.json, lines)
    return 0


def cmd_optimize(args) -> int:
    expr = build_bell_expression(args.n, parse_sign(args.sign, args.n))
    state = parse_state(args.state, args.n)
    result = optimize_settings(
        expr, state, args.mode, args.restarts, args.seed, threads=args.threads
    )
    payload = {
        "n": args.n,
        "sign": expr.sign,
        "mode": args.mode,
        "value": result.value,
        "restart": result.restart,
        "canonical_value": result.start_values[0],
        "settings": result.settings.to_list(),
    }
    lines = [
        f"best value = {fmt(result.value)} (restart {result.restart})",
        f"canonical-settings value = {fmt(result.start_values[0])}",
    ]
    _emit(payload, args.json, lines)
    return 0


def cmd_calibrate(args) -> int:
    n_max = args.n_max if args.n_max is not None else args.n
    rows = []
    for n in range(args.n, n_max + 1):
        s = calibrate_sign(n)
        rows.append({"n": n, "sign": s, "printed_sign": (-1) ** ((n - 1) // 4)})
    lines = [f"n = {r['n']}: sign {r['sign']:+d} (printed exponent gives {r['printed_sign']:+d})" for r in rows]
    _emit({"calibration": rows}, args.json, lines)
    return 0


def cmd_scan(args) -> int:
    if args.points < 1:
        raise BellError("--points must be >= 1")
    alpha_max = parse_angle(args.alpha_max)
    grid = np.linspace(0.0, alpha_max, args.points) if args.points > 1 else [0.0]
    records = scan_alpha(args.n, grid)
    rows = [
        [
            fmt(r.alpha),
            fmt(r.sin_2alpha),
            fmt(r.tau),
            fmt(r.bell_value),
            fmt(r.two_sqrt_tau),
            fmt(r.threshold_paper),
            fmt(r.threshold_sg),
            "true" if r.violation else "false",
        ]
        for r in records
    ]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return 0


def cmd_tangle(args) -> int:
    state = parse_state(args.state, args.n)
    tau = n_tangle(state)
    payload: dict[str, Any] = {"n": args.n, "state": args.state, "tau": tau}
    lines = [f"tau = {fmt(tau)}"]
    if args.n == 4:
        bell, two_sqrt_tau, residual = nonlocality_tangle_relation(state)
        payload.update(bell_value=bell, two_sqrt_tau=two_sqrt_tau, residual=residual)
        lines += [
            f"<B> = {fmt(bell)}",
            f"2 sqrt(tau) = {fmt(two_sqrt_tau)}",
            f"residual = {residual:.3e}",
        ]
    _emit(payload, args.json, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bellscale", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    threads_default = os.cpu_count() or 1

    p = sub.add_parser("build", help="expand a Bell expression into correlation terms")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--sign", default="auto")
    p.add_argument("--leader", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="also write the JSON form to this path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("lhv-bound", help="exhaustive local-hidden-variable maximum")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--sign", default="auto")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--samples", type=int, default=0, help="random strategies when n > cap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=threads_default)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_lhv)

    p = sub.add_parser("expect", help="quantum value on a GHZ-family state")
    p.add_argument("--n", type=_n)
    p.add_argument("--sign", default="auto")
    p.add_argument("--state", default="ghz")
    p.add_argument("--settings", default="canonical")
    p.add_argument("--expr", help="expression JSON written by `build --out`")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_expect)

    p = sub.add_parser("eigen", help="largest eigenvalue of the fixed-settings Bell operator")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--sign", default="auto")
    p.add_argument("--settings", default="canonical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("optimize", help="search measurement settings for a larger value")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--sign", default="auto")
    p.add_argument("--state", default="ghz")
    p.add_argument("--mode", choices=MODES, default="planar")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("calibrate", help="empirical sign of the second product")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--n-max", type=_n, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("scan", help="GGHZ angle scan (CSV)")
    p.add_argument("--n", type=_n, required=True)
    p.add_argument("--points", type=int, default=181)
    p.add_argument("--alpha-max", default="pi/2")
    p.add_argument("--csv", help="output path; stdout if omitted")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("tangle", help="n-tangle and, for n=4, the Bell-tangle relation")
    p.add_argument("--n", type=_n, default=4)
    p.add_argument("--state", default="ghz")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tangle)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except BellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CalibrationError, ConvergenceError) as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
