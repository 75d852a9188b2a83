"""Command-line entry point: ``fggc {solve,compare,mlsa,bench}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import logging
import math
import operator
import statistics
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .core import MeshError, named_strategy
from .fieldio import FieldFormatError, FieldHeader, read_field, write_field
from .flow import CausticError
from .lsa import RCOND, SAMPLES_PER_AXIS, m_lsa, m_lsa_h1
from .metrics import compare as compare_fields

log = logging.getLogger("fggc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# Mesh families of the M_LSA tables: dq = cq sqrt(eps) (columns), dp = cp sqrt(eps) (rows).
CQ_FAMILY = (2.0, 1.0, 0.5, 0.25)
CP_FAMILY = (math.pi / 2, math.pi / 4, math.pi / 8, math.pi / 16)
EPS_EXPONENTS = (6, 8, 10, 12, 14, 16)
STRATEGIES = ("Q2P2", "Q4P2", "Q2P4", "Q4P4")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _arith(node) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_arith(node.left), _arith(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_arith(node.operand)
    raise ValueError("expected a number or an arithmetic expression in pi")


def _floats(text: str) -> list[float]:
    """Comma-separated numbers; each may be arithmetic in ``pi``, e.g. ``pi/8``."""
    try:
        return [_arith(ast.parse(part.strip().lower(), mode="eval").body) for part in text.split(",")]
    except SyntaxError:
        raise ValueError(f"cannot parse number list {text!r}") from None


def mlsa_l2_table(strategy: str, cqs=CQ_FAMILY, cps=CP_FAMILY, dim: int = 1, samples: int = SAMPLES_PER_AXIS, rcond: float = RCOND):
    """Rows follow ``cps`` and columns follow ``cqs``."""
    st = named_strategy(strategy, dim)
    return [[m_lsa(st, cq, cp, dim, samples, rcond=rcond) for cq in cqs] for cp in cps]


def mlsa_h1_table(strategies=STRATEGIES, exponents=EPS_EXPONENTS, cq: float = 0.5, cp: float = math.pi / 8, dim: int = 1, samples: int = SAMPLES_PER_AXIS, rcond: float = RCOND):
    """Rows follow ``eps = 2**-k`` for k in ``exponents``; columns follow ``strategies``."""
    sts = [named_strategy(s, dim) for s in strategies]
    return [[m_lsa_h1(st, cq, cp, dim, 2.0**-k, samples, rcond=rcond) for st in sts] for k in exponents]


def _write_rows(path, header, rows) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "mode", None) == "sequential":
        changes["threads"] = 1
    return cfg.replace(**changes).validate()


def cmd_solve(args) -> int:
    from .reconstruct import solve

    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = solve(cfg)
    field_path = out / cfg.output.get("field", "field.fgcf")
    write_field(field_path, result.field, result.mesh)
    report = {
        "solver": cfg.solver,
        "config_digest": cfg.digest,
        "threads": cfg.threads,
        "timing": result.timing,
        "stats": result.stats,
        "field": str(field_path),
    }
    (out / cfg.output.get("timing", "timing.json")).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", field_path)
    return EXIT_OK


def cmd_compare(args) -> int:
    a, ha = read_field(args.candidate)
    b, hb = read_field(args.reference)
    if ha != hb:
        raise FieldFormatError(f"headers differ: {ha} vs {hb}")
    from .core import MeshSpec

    mesh = MeshSpec(hb.epsilon, hb.dim, (hb.hi[0] - hb.lo[0]) / hb.counts[0], 1.0, 1.0, hb.lo, hb.hi)
    digest = ExperimentConfig.load(args.config).digest if args.config else ""
    report = compare_fields(a, b, mesh, labels=(str(args.candidate), str(args.reference)), digest=digest)
    text = report.to_json() + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_mlsa(args) -> int:
    strategies = [s.strip().upper() for s in args.strategies.split(",") if s.strip()]
    for s in strategies:
        named_strategy(s, args.dim)
    if args.mode == "l2":
        cqs = _floats(args.cq) if args.cq else CQ_FAMILY
        cps = _floats(args.cp) if args.cp else CP_FAMILY
        header = ["strategy", "cp"] + [f"cq={cq:g}" for cq in cqs]
        rows = []
        for s in strategies:
            table = mlsa_l2_table(s, cqs, cps, args.dim, args.samples, args.rcond)
            rows += [[s, f"{cp:.10g}"] + [f"{v:.3e}" for v in row] for cp, row in zip(cps, table)]
    else:
        cq = _floats(args.cq)[0] if args.cq else 0.5
        cp = _floats(args.cp)[0] if args.cp else math.pi / 8
        exps = [int(v) for v in _floats(args.eps_exponents)] if args.eps_exponents else EPS_EXPONENTS
        table = mlsa_h1_table(strategies, exps, cq, cp, args.dim, args.samples, args.rcond)
        header = ["epsilon"] + strategies
        rows = [[f"2^-{k}"] + [f"{v:.3e}" for v in row] for k, row in zip(exps, table)]
    _write_rows(args.out, header, rows)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .reconstruct import TIMING_KEYS, solve

    cfg = _load_config(args)
    modes = {"sequential": [1], "parallel": [max(cfg.threads, 1)]}
    if args.mode in modes:
        modes = {args.mode: modes[args.mode]}
    phases = [k for k in TIMING_KEYS if k.endswith("_s")]
    rows = []
    for mode, threads_list in modes.items():
        for threads in threads_list:
            runs = [solve(cfg.replace(threads=threads)).timing for _ in range(args.repetitions)]
            med = [statistics.median(r[k] for r in runs) for k in phases]
            rows.append([cfg.solver, mode, threads, args.repetitions, runs[0]["packet_count"]] + [f"{v:.6f}" for v in med])
    _write_rows(args.out, ["solver", "mode", "threads", "repetitions", "packet_count"] + phases, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fggc", description="Frozen Gaussian solvers for the semiclassical Schrodinger equation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode_choices):
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=mode_choices, default=None)

    p = sub.add_parser("solve", help="run one solver and write the field and timings")
    common(p, ["sequential", "parallel"])
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="error report of a candidate field against a reference")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--config", default=None, help="config whose digest is recorded in the report")
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mlsa", help="tabulate sampled splitting errors")
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--mode", choices=["l2", "h1"], default="l2")
    p.add_argument("--cq", default=None, help="comma list, e.g. 2,1,0.5,0.25")
    p.add_argument("--cp", default=None, help="comma list, e.g. pi/2,pi/4")
    p.add_argument("--eps-exponents", default=None, help="h1 mode: k values of eps = 2^-k")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--samples", type=int, default=SAMPLES_PER_AXIS)
    p.add_argument("--rcond", type=float, default=RCOND)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_mlsa)

    p = sub.add_parser("bench", help="median phase timings over repetitions")
    common(p, ["sequential", "parallel"])
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CausticError as exc:
        print(json.dumps({"error": "numerical_abort", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, MeshError, FieldFormatError, ValueError, OSError) as exc:
        print(json.dumps({"error": "config", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
