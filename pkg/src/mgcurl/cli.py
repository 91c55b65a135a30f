"""``mgcurl`` command-line driver.

Subcommands::

    mgcurl table --smoother edge --alpha 0.01,0.1,1,10,100 --levels 1..4 --steps 1..5
    mgcurl converge --alpha 1 --levels 3
    mgcurl check

Any subcommand accepts ``--config FILE``, a flat ``key = value`` file whose
entries override the command-line flags. Exit status is 0 on success, 2 for
invalid input and 3 when an iteration fails to converge.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

logger = logging.getLogger("mgcurl")


class UsageError(ValueError):
    pass


def parse_int_list(text: str) -> tuple[int, ...]:
    """``"1..4"`` or ``"1,3,4"`` (pieces may be mixed: ``"1,3..5"``)."""
    out: list[int] = []
    for piece in str(text).split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            if ".." in piece:
                lo, hi = piece.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise UsageError(f"empty range {piece!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(piece))
        except ValueError as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"not an integer list: {text!r}") from None
    return tuple(out)


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise UsageError(f"not a list of numbers: {text!r}") from None


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` pairs; ``#`` starts a comment. Dashes in keys become underscores."""
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key.replace("-", "_").lower()] = value
    return entries


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}

# config key -> (argparse dest, converter)
_CONFIG_KEYS = {
    "smoother": ("smoother", str),
    "alpha": ("alpha", str),
    "levels": ("levels", str),
    "steps": ("steps", str),
    "eta": ("eta", float),
    "seed": ("seed", int),
    "tol": ("tol", float),
    "cap": ("cap", int),
    "format": ("format", str),
    "deterministic": ("deterministic", lambda v: _BOOL[v.lower()]),
    "output": ("output", str),
    "order": ("order", int),
    "workers": ("workers", int),
}


def apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    for key, value in read_config(args.config).items():
        if key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        dest, conv = _CONFIG_KEYS[key]
        if not hasattr(args, dest):
            raise UsageError(f"config key {key!r} does not apply to '{args.command}'")
        try:
            setattr(args, dest, conv(value))
        except (ValueError, KeyError):
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return args


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgcurl", description="Multigrid for H(curl) on a cube.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", help="contraction numbers over alpha, level and smoothing steps")
    t.add_argument("--smoother", default="edge")
    t.add_argument("--alpha", default="0.01,0.1,1,10,100")
    t.add_argument("--levels", default="1..4")
    t.add_argument("--steps", default="1..5")
    t.add_argument("--eta", type=float, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--cap", type=int, default=500)
    t.add_argument("--format", default="csv")
    t.add_argument("--deterministic", action="store_true")
    t.add_argument("--workers", type=int, default=None)
    t.add_argument("--output", "-o", default=None)
    t.add_argument("--config", default=None)

    c = sub.add_parser("converge", help="manufactured-solution L2 errors per level")
    c.add_argument("--alpha", default="1")
    c.add_argument("--levels", default="3")
    c.add_argument("--order", type=int, default=4)
    c.add_argument("--smoother", default="vertex")
    c.add_argument("--format", default="csv")
    c.add_argument("--output", "-o", default=None)
    c.add_argument("--config", default=None)

    k = sub.add_parser("check", help="structural checks: coarse-edge lemma, Galerkin identity, damping bound")
    k.add_argument("--levels", default="2")
    k.add_argument("--alpha", default="0.01,1,100")
    k.add_argument("--output", "-o", default=None)
    k.add_argument("--config", default=None)
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_table(args) -> int:
    from .experiments import ExperimentConfig, run_table

    fmt = "md" if args.format == "markdown" else args.format
    config = ExperimentConfig(
        smoother=args.smoother,
        alphas=parse_float_list(args.alpha),
        levels=parse_int_list(args.levels),
        steps=parse_int_list(args.steps),
        eta=args.eta,
        seed=args.seed,
        tol=args.tol,
        cap=args.cap,
        output_format=fmt,
        deterministic=args.deterministic,
    )
    report = run_table(config, workers=args.workers)
    _emit(report.render(fmt), args.output)
    if not report.all_converged:
        bad = sum(not r.converged for r in report.rows)
        logger.error("%d row(s) hit the power-iteration cap", bad)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_converge(args) -> int:
    from .experiments import manufactured_convergence

    alphas = parse_float_list(args.alpha)
    (top,) = parse_int_list(args.levels)[-1:] or (None,)
    if top is None or not alphas:
        raise UsageError("need --alpha and --levels")
    lines = []
    if args.format in ("md", "markdown"):
        lines += ["| alpha | k | L2 error | ratio | pcg iters |", "|---|---|---|---|---|"]
    else:
        lines.append("alpha,k,error,ratio,pcg_iters")
    for a in alphas:
        try:
            res = manufactured_convergence(a, top, args.order, smoother=args.smoother)
        except RuntimeError as exc:
            logger.error("%s", exc)
            return EXIT_NOT_CONVERGED
        ratios = (float("nan"),) + res.ratios
        for k, e, q, it in zip(res.levels, res.errors, ratios, res.iterations):
            if args.format in ("md", "markdown"):
                lines.append(f"| {a:g} | {k} | {e:.4e} | {q:.3f} | {it} |")
            else:
                lines.append(f"{a!r},{k},{e!r},{q!r},{it}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    from .assembly import assemble_operator
    from .mesh import build_hierarchy
    from .smoothers import DAMPING_BOUND, build_blocks, lemma_coarse_check, smoother_max_eigenvalue
    from .transfer import build_prolongation

    top = max(parse_int_list(args.levels))
    if top < 1:
        raise UsageError("check needs --levels >= 1")
    alphas = parse_float_list(args.alpha)
    H = build_hierarchy(top)
    lines = []
    failed = False

    for k in range(1, top + 1):
        coarse = H[k - 1]
        n = coarse.n
        vals = [lemma_coarse_check(H, k, (0, a, p, q)) for a in range(n) for p in range(1, n) for q in range(1, n)]
        ok = min(vals) > 1e-8
        failed |= not ok
        lines.append(f"lemma     level={k} edges={len(vals)} min_curl_norm={min(vals):.12e} {'ok' if ok else 'FAIL'}")

    for a in alphas:
        for k in range(1, top + 1):
            A, Ac = assemble_operator(H, k, a), assemble_operator(H, k - 1, a)
            P = build_prolongation(H, k).matrix
            diff = abs(P.T @ A.matrix @ P - Ac.matrix).max() / abs(Ac.matrix).max()
            ok = diff <= 1e-12
            failed |= not ok
            lines.append(f"galerkin  alpha={a:g} level={k} rel_err={diff:.3e} {'ok' if ok else 'FAIL'}")

    for kind, eta in DAMPING_BOUND.items():
        for a in alphas:
            for k in range(1, top + 1):
                A = assemble_operator(H, k, a)
                lam = smoother_max_eigenvalue(build_blocks(H, A, k, kind, eta), A)
                ok = lam <= 1 + 1e-8
                failed |= not ok
                lines.append(
                    f"spectral  {kind:6s} eta={eta:.6f} alpha={a:g} level={k} lambda_max={lam:.10f} {'ok' if ok else 'FAIL'}"
                )
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_INVALID if failed else EXIT_OK


_COMMANDS = {"table": cmd_table, "converge": cmd_converge, "check": cmd_check}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage already; keep --help at 0
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args = apply_config(args)
        return _COMMANDS[args.command](args)
    except ValueError as exc:  # includes UsageError and ConfigError
        print(f"mgcurl: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
