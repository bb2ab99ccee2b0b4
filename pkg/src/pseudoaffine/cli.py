"""Command-line entry point: ``pseudoaffine <command> [options]``.

Commands write their main artifact to ``--out`` (stdout when omitted).
Every JSON report carries the package version and the full configuration.
Exit codes: 0 ok, 1 domain error, 2 capacity or convergence, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import affine_branches, chi_trace, conjugacy_verdict, livsic_check
from .cantor import realize
from .errors import CapacityError, DomainError
from .families import example, parse_s, s_to_json
from .ifs import build_branches
from .proportions import ProportionPair
from .render import alternating_words, render_svg
from .transfer import (build_system, conjugating_map, parse_potential, periodic_sum_check,
                       verify_derivative_identity)
from .words import Coding

EXIT_OK, EXIT_DOMAIN, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise DomainError(message)


# configuration ----------------------------------------------------------

def _config(args) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        cfg[k] = v
    return cfg


def _check(cond: bool, message: str):
    if not cond:
        raise DomainError(message)


def _validate(args):
    lam = getattr(args, "lam", None)
    if lam is not None:
        _check(0.0 < lam < 0.5, f"--lambda must lie in (0, 1/2), got {lam}")
    if getattr(args, "s", None) is not None:
        args.s = s_to_json(parse_s(args.s))
    eps0 = getattr(args, "eps0", None)
    if eps0 is not None:
        _check(0.0 < eps0 < 0.5, f"--eps0 must lie in (0, 1/2), got {eps0}")
    gamma = getattr(args, "gamma", None)
    if gamma is not None:
        _check(gamma > 0, f"--gamma must be positive, got {gamma}")
    depth = getattr(args, "depth", None)
    if depth is not None:
        _check(depth >= 0, f"--depth must be non-negative, got {depth}")
    for name in ("tol", "tail_tol", "rel_tol", "osc_tol"):
        v = getattr(args, name, None)
        if v is not None:
            _check(0.0 < v < 1.0, f"--{name.replace('_', '-')} must lie in (0, 1), got {v}")


def _pair(source: str | None, args) -> ProportionPair:
    """``zero``, ``a``, ``b`` or a path to a proportions (or table) JSON file."""
    if source in (None, "zero"):
        return ProportionPair.constant(args.lam)
    if source in ("a", "b"):
        return example(source, lam=args.lam, s=args.s, eps0=args.eps0, gamma=args.gamma)
    try:
        doc = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{source}: not valid JSON ({exc})") from None
    if "proportions" in doc:
        doc = doc["proportions"]
    return ProportionPair.from_dict(doc)


def _pair_from_args(args) -> ProportionPair:
    return _pair(args.example or args.theta, args)


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _report(args, result: dict) -> str:
    return _dump({"version": __version__, "command": args.command, "config": _config(args),
                  **result})


# commands ------------------------------------------------------------------

def cmd_construct(args) -> int:
    p = _pair_from_args(args)
    table = realize(p, args.depth, args.tail_tol)
    stem = Path(args.out) if args.out else None
    doc = {"version": __version__, "config": _config(args), **table.to_dict()}
    summary = {"L": table.L, "total": table.total, "tail_bound": table.tail_bound,
               "error_bound": table.error_bound}
    if stem is None:
        sys.stdout.write(_dump(summary))
        return EXIT_OK
    Path(str(stem) + ".csv").write_text(table.to_csv())
    Path(str(stem) + ".json").write_text(_dump(doc))
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_render(args) -> int:
    if args.table:
        try:
            doc = json.loads(Path(args.table).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"{args.table}: not valid JSON ({exc})") from None
        if "proportions" not in doc or "depth" not in doc:
            raise DomainError(f"{args.table} is not a gap table document")
        p = ProportionPair.from_dict(doc["proportions"])
        depth = int(doc["depth"])
    else:
        p = _pair_from_args(args)
        depth = args.depth
    table = realize(p, depth)
    highlight = alternating_words(depth) if args.highlight == "alternating" else ()
    branches = None
    if args.panels:
        branches = build_branches(p, min(depth, args.branch_depth), tol=1e-8)
    _write(args.out, render_svg(table, highlight=highlight, branches=branches))
    return EXIT_OK


def cmd_livsic(args) -> int:
    if args.perturbed is not None:
        s0, s1 = args.perturbed
        _check(0 < s0 < 0.5 and 0 < s1 < 0.5, "perturbed slopes must lie in (0, 1/2)")
        branches = affine_branches(s0, s1)
        extra = {}
    else:
        p = _pair_from_args(args)
        branches = build_branches(p, args.depth, tol=args.tol)
        extra = {"branch_tol": args.tol, "tau": branches.tau,
                 "tau_tail_bound": branches.tau_tail_bound}
    rep = livsic_check(branches, args.maxlen, args.rel_tol, tol=args.fp_tol)
    result = {"result": rep.to_dict(), "error_bounds": {"fixed_point_tol": args.fp_tol, **extra}}
    _write(args.out, _report(args, result))
    return EXIT_OK


def cmd_chi(args) -> int:
    theta = _pair(args.theta, args)
    eta = _pair(args.eta, args)
    codings = [Coding.parse(c) for c in (args.coding or ["(01)^inf"])]
    if args.random:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.random):
            pre = "".join(rng.choice(["0", "1"], size=int(rng.integers(0, 4))))
            block = "".join(rng.choice(["0", "1"], size=int(rng.integers(1, 5))))
            codings.append(Coding(pre, block))
    traces = [chi_trace(theta, eta, a, args.n) for a in codings]
    verdict = conjugacy_verdict(traces, args.osc_tol)
    result = {"result": verdict,
              "traces": {str(t.coding): [v for _, v in t.values] for t in traces},
              "error_bounds": {"relative_rounding": 2 * args.n * 2.0 ** -52}}
    _write(args.out, _report(args, result))
    return EXIT_OK


def cmd_transfer(args) -> int:
    phi = parse_potential(args.phi)
    sys_ = build_system(phi, args.depth, tol=args.tol)
    result = {"result": sys_.to_dict(),
              "error_bounds": {"eigen_residual": sys_.residual,
                               "discretization_error": sys_.discretization_error}}
    if args.verify:
        result["verify"] = verify_derivative_identity(sys_, phi, args.samples)
    if args.period_max:
        result["periodic"] = periodic_sum_check(phi, args.period_max)
    if args.csv:
        h_inv, h = conjugating_map(sys_)
        xs = (np.arange(args.samples) + 0.5) / args.samples
        hx = h(xs)
        branch = np.minimum(np.floor(3 * hx), 2)
        that = h_inv(3 * hx - branch)
        lines = ["x,h,T_hat"] + [f"{x:.17g},{a:.17g},{b:.17g}" for x, a, b in zip(xs, hx, that)]
        Path(args.csv).write_text("\n".join(lines) + "\n")
    _write(args.out, _report(args, result))
    return EXIT_OK


# parser --------------------------------------------------------------------

def _add_pair_args(sp, theta=True):
    sp.add_argument("--lambda", dest="lam", type=float, default=0.3, help="slope in (0, 1/2)")
    if theta:
        sp.add_argument("--theta", default=None,
                        help="zero, a, b or a proportions JSON file (default zero)")
        sp.add_argument("--example", choices=["zero", "a", "b"], default=None,
                        help="one of the built-in families")
    sp.add_argument("--s", default="2", help="regularity index (a number >= 1 or inf)")
    sp.add_argument("--eps0", type=float, default=0.2, help="case (b) first perturbation")
    sp.add_argument("--gamma", type=float, default=2.0, help="case (a), s = 1 decay exponent")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pseudoaffine", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("construct", help="realize a gap table (CSV + JSON)")
    _add_pair_args(sp)
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--tail-tol", type=float, default=1e-14)
    sp.add_argument("--out", default=None, help="output stem; writes STEM.csv and STEM.json")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("render", help="draw a gap table as SVG")
    _add_pair_args(sp)
    sp.add_argument("--table", default=None, help="gap table JSON written by construct")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--highlight", choices=["none", "alternating"], default="none",
                    help="alternating: mark the gaps (01)^k")
    sp.add_argument("--panels", action="store_true", help="add f_i and f_i' graphs")
    sp.add_argument("--branch-depth", type=int, default=8)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("livsic", help="periodic-data check")
    _add_pair_args(sp)
    sp.add_argument("--perturbed", type=float, nargs=2, default=None, metavar=("S0", "S1"),
                    help="use the affine pair with these slopes instead")
    sp.add_argument("--depth", type=int, default=10, help="branch depth")
    sp.add_argument("--tol", type=float, default=1e-12, help="branch evaluation tolerance")
    sp.add_argument("--fp-tol", type=float, default=1e-13, help="fixed point tolerance")
    sp.add_argument("--maxlen", type=int, default=8)
    sp.add_argument("--rel-tol", type=float, default=1e-6)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_livsic)

    sp = sub.add_parser("chi", help="cocycle ratio traces and verdict")
    _add_pair_args(sp, theta=False)
    sp.add_argument("--theta", default="zero", help="zero, a, b or a JSON file")
    sp.add_argument("--eta", default="zero", help="zero, a, b or a JSON file")
    sp.add_argument("--coding", action="append", help="prefix(block)^inf; repeatable")
    sp.add_argument("--random", type=int, default=0, help="extra random codings")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=40)
    sp.add_argument("--osc-tol", type=float, default=1e-6)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_chi)

    sp = sub.add_parser("transfer", help="Ruelle operator of the tripling map")
    sp.add_argument("--phi", default="const:0",
                    help="const:c, digits:v0,..., or cobound:u0,u1,u2")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--verify", action="store_true")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--period-max", type=int, default=0)
    sp.add_argument("--csv", default=None, help="write h and T_hat samples here")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_transfer)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "example", None) and getattr(args, "theta", None) not in (None, "zero"):
            if args.command != "chi":
                raise DomainError("give either --example or --theta, not both")
        _validate(args)
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
