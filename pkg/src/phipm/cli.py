"""Command-line front end: ``phipm eval | gen | bench``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import linops
from .linops import MatrixMarketError, SparseMatrix
from .stepper import SolveOptions, SolverError, solve

EXIT_USAGE = 1
EXIT_SOLVER = 2

BENCH_COLUMNS = ("time_s", "matvecs", "exponentials", "steps", "rejections", "rel_error")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _symm(value: str):
    try:
        return {"auto": None, "true": True, "false": False}[value.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError("expected auto, true or false") from None


def _solver_args(p: argparse.ArgumentParser, fixed_m_default=None):
    p.add_argument("--matrix", required=True, help="Matrix Market file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--b", dest="b_path", help="columns b_0..b_p, whitespace delimited")
    src.add_argument("--ones", dest="ones_p", type=int, metavar="P",
                     help="use b_0 = ... = b_P = all-ones")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--symm", type=_symm, default=None, help="auto|true|false")
    p.add_argument("--m-init", type=int, default=10)
    p.add_argument("--m-max", type=int, default=100)
    p.add_argument("--fixed-m", type=int, default=fixed_m_default)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phipm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("eval", help="evaluate a phi-function combination")
    _solver_args(ev)
    ev.add_argument("--out", help="solution file (default: standard output)")
    ev.add_argument("--stats", help="write solver statistics as JSON")

    gen = sub.add_parser("gen", help="write a test matrix in Matrix Market format")
    gen.add_argument("generator", choices=["laplacian9", "laplacian1d", "random"])
    gen.add_argument("--grid", type=int, default=30)
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--h", type=float, default=1.0)
    gen.add_argument("--negate", action="store_true")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--density", type=float, default=0.1)
    gen.add_argument("--out", help="output file (default: standard output)")

    bench = sub.add_parser("bench", help="fixed-m versus adaptive-m comparison")
    _solver_args(bench, fixed_m_default=30)
    bench.add_argument("--repeat", type=int, default=5)
    bench.add_argument("--roundtrip", action="store_true",
                       help="solve exp(tA) b_0, then exp(-tA) of the result")
    bench.add_argument("--ref-tol", type=float, default=1e-12)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", help="also write the table as tab-separated values")
    return parser


def random_sparse(n: int, density: float, seed: int) -> SparseMatrix:
    """Random sparse matrix with unit infinity norm and a nonzero diagonal."""
    rng = np.random.default_rng(seed)
    m = sp.random(n, n, density=density, random_state=rng, format="csr",
                  data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
    m = (m + sp.diags(rng.uniform(-1.0, 1.0, n))).tocsr()
    m = m / abs(m).sum(axis=1).max()
    return SparseMatrix.from_scipy(m)


def _load_problem(args):
    try:
        mat = linops.read_matrix_market(args.matrix)
    except (OSError, MatrixMarketError) as exc:
        raise UsageError(f"cannot read matrix {args.matrix}: {exc}") from None
    if args.b_path is not None:
        try:
            B = linops.read_vectors(args.b_path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {args.b_path}: {exc}") from None
        if B.shape[0] != mat.n:
            raise UsageError(f"b has {B.shape[0]} rows, matrix has order {mat.n}")
    elif args.ones_p is not None:
        if args.ones_p < 0:
            raise UsageError("--ones needs P >= 0")
        B = np.ones((mat.n, args.ones_p + 1))
    else:
        raise UsageError("one of --b or --ones is required")
    return mat, B


def _options(args, tol=None, fixed_m=None, t_end=None) -> SolveOptions:
    try:
        return SolveOptions(
            t_end=args.t if t_end is None else t_end,
            tol=args.tol if tol is None else tol,
            symmetric=args.symm,
            m_init=min(args.m_init, args.m_max),
            m_max=args.m_max,
            fixed_m=fixed_m,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def cmd_eval(args) -> int:
    mat, B = _load_problem(args)
    opts = _options(args, fixed_m=args.fixed_m)
    u, stats = solve(mat, B, opts)
    text = "".join(_fmt(v) + "\n" for v in u)
    summary_stream = sys.stdout
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
        summary_stream = sys.stderr
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats.as_dict()) + "\n")
    print(f"n={mat.n} p={B.shape[1] - 1} t={args.t:g} tol={args.tol:g} "
          f"steps={stats.steps} rejections={stats.rejections} "
          f"matvecs={stats.matvecs} exponentials={stats.exponentials}",
          file=summary_stream)
    return 0


def cmd_gen(args) -> int:
    try:
        if args.generator == "laplacian9":
            mat = linops.gen_laplacian9(args.grid, args.h, args.negate)
        elif args.generator == "laplacian1d":
            mat = linops.gen_laplacian1d(args.n, args.h, args.negate)
        else:
            if args.n < 1 or not 0 < args.density <= 1:
                raise ValueError("random needs n >= 1 and 0 < density <= 1")
            mat = random_sparse(args.n, args.density, args.seed)
            if args.negate:
                mat = -mat
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        linops.write_matrix_market(args.out, mat)
        print(f"n={mat.n} nnz={mat.nnz}")
    else:
        sys.stdout.write(linops.format_matrix_market(mat))
        print(f"n={mat.n} nnz={mat.nnz}", file=sys.stderr)
    return 0


def _rel_error(u, ref) -> float:
    scale = np.linalg.norm(ref)
    diff = np.linalg.norm(u - ref)
    return float(diff / scale) if scale > 0 else float(diff)


def run_bench(mat: SparseMatrix, B: np.ndarray, args) -> list[dict]:
    """Average each mode over ``args.repeat`` runs; returns one row per mode."""
    modes = [("phip", args.fixed_m), ("phipm", None)]

    if args.roundtrip:
        b0 = B[:, 0]
        neg = -mat

        def run(opts):
            w, s1 = solve(mat, b0, opts)
            v, s2 = solve(neg, w, opts)
            for f in ("steps", "rejections", "matvecs", "exponentials"):
                setattr(s1, f, getattr(s1, f) + getattr(s2, f))
            return v, s1

        reference = b0
    else:
        def run(opts):
            return solve(mat, B, opts)

        reference, _ = solve(mat, B, _options(args, tol=args.ref_tol))

    rows = []
    for name, fixed_m in modes:
        opts = _options(args, fixed_m=fixed_m)
        times = []
        for _ in range(max(args.repeat, 1)):
            start = time.perf_counter()
            u, stats = run(opts)
            times.append(time.perf_counter() - start)
        rows.append({
            "mode": name if fixed_m is None else f"{name}(m={fixed_m})",
            "time_s": float(np.mean(times)),
            "matvecs": stats.matvecs,
            "exponentials": stats.exponentials,
            "steps": stats.steps,
            "rejections": stats.rejections,
            "rel_error": _rel_error(u, reference),
        })
    return rows


def format_table(rows: list[dict], sep: str = "\t") -> str:
    header = sep.join(("mode",) + BENCH_COLUMNS)
    lines = [header]
    for r in rows:
        cells = [r["mode"], f"{r['time_s']:.6f}", str(r["matvecs"]), str(r["exponentials"]),
                 str(r["steps"]), str(r["rejections"]), f"{r['rel_error']:.3e}"]
        lines.append(sep.join(cells))
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    mat, B = _load_problem(args)
    if args.fixed_m is None or args.fixed_m < 1:
        raise UsageError("--fixed-m must be a positive integer for bench")
    rows = run_bench(mat, B, args)
    table = format_table(rows)
    sys.stdout.write(table)
    if rows[1]["time_s"] > 0:
        print(f"speedup (fixed/adaptive) = {rows[0]['time_s'] / rows[1]['time_s']:.2f}")
    if args.out:
        Path(args.out).write_text(table)
    return 0


COMMANDS = {"eval": cmd_eval, "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"phipm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"phipm {args.command}: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
