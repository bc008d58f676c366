"""Command line front end.

    stratcheck check SCENE --condition c [--pair LO,HI] [--base x,y,...]
    stratcheck stratify SCENE|POLYNOMIAL [--conditions w,b]
    stratcheck gallery [--filter NAME]

SCENE is a scene file or the name of a shipped scene. Exit codes: 0 the
condition holds (or the stratification is certified, or every gallery
expectation is met), 2 it fails, 3 inconclusive, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .conditions import CONDITIONS, FAILS, HOLDS, CheckParams, _jsonable, check_many
from .expr import BinOp, Unary, Var, parse
from .polynomial import Polynomial
from .scene import Scene, SceneError, load_scene, scene_from_stratification
from .strata import PointStratum, base_points
from .stratify import (
    CERTIFIED,
    REFUTED,
    NonConvergence,
    NotSquareFree,
    RefinementState,
    UnsupportedCriticalLocus,
    UnsupportedSingularLocus,
    certify,
    initial_decomposition,
    rank_partition,
    refine,
)

EXIT_OK, EXIT_USAGE, EXIT_FAILS, EXIT_INCONCLUSIVE = 0, 1, 2, 3
TOLERANCES = ("slope_tol", "residual_tol", "b_gap", "zero_tol", "dps")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "Fails"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must be comma separated numbers, got {text!r}") from None


def _grid(text: str):
    vals = _floats(text, "--grid")
    if len(vals) != 3 or not (0 < vals[0] and 0 < vals[1] < 1 and vals[2] >= 8 and vals[2] == int(vals[2])):
        raise UsageError("--grid takes t0,q,m with t0 > 0, 0 < q < 1 and an integer m >= 8")
    return (vals[0], vals[1], int(vals[2]))


def _params(args) -> CheckParams:
    kw = {"seed": args.seed}
    if args.grid:
        kw["grid"] = _grid(args.grid)
    if args.wings is not None:
        if args.wings < 0:
            raise UsageError("--wings must be non-negative")
        kw["wings"] = args.wings
    for item in args.tol or []:
        name, _, value = item.partition("=")
        if name not in TOLERANCES or not value:
            raise UsageError(f"--tol takes name=value with name in {', '.join(TOLERANCES)}")
        try:
            kw[name] = int(value) if name == "dps" else float(value)
        except ValueError:
            raise UsageError(f"bad value in --tol {item!r}") from None
    return CheckParams(**kw)


def _scene(ref: str) -> Scene:
    from .gallery import scene_path

    path = Path(ref)
    if not path.exists():
        shipped = scene_path(ref)
        if not shipped.exists():
            raise UsageError(f"no scene file or shipped scene named {ref!r}")
        path = shipped
    return load_scene(path)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--grid", help="wing parameter grid t0,q,m (default 0.1,0.6,24)")
    p.add_argument("--wings", type=int, help="random wings per base point (default 8)")
    p.add_argument("--base-grid", type=int, default=None, help="base points per stratum when none are given")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance; repeatable")
    p.add_argument("--out", default="stratcheck-out", help="output directory (default stratcheck-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stratcheck", description="Sampled checks of Whitney, Verdier and Thom regularity.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("check", help="run one condition on one stratum pair")
    p.add_argument("scene")
    p.add_argument("--condition", "-c", required=True, choices=CONDITIONS)
    p.add_argument("--pair", help="LOWER,UPPER; defaults to the only frontier pair")
    p.add_argument("--base", action="append", help="base point x,y,...; repeatable")
    _common(p)

    p = sub.add_parser("stratify", help="stratify, refine and certify a scene or a polynomial")
    p.add_argument("scene", help="scene file, shipped scene name, or a polynomial in x, y, z")
    p.add_argument("--conditions", default="w", help="comma separated subset of w,a,b,af,wf (default w)")
    p.add_argument("--max-rounds", type=int, default=5)
    _common(p)

    p = sub.add_parser("gallery", help="run the built-in examples against their expected verdicts")
    p.add_argument("--filter", action="append", help="entry name; repeatable")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    _common(p)
    return parser


# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    from .gallery import write_report

    scene = _scene(args.scene)
    params = _params(args)
    S = scene.stratification
    if args.pair:
        pair = tuple(args.pair.split(","))
        if len(pair) != 2 or any(k not in S.strata for k in pair):
            raise UsageError(f"--pair must name two strata of the scene, got {args.pair!r}")
    elif len(S.frontier) == 1:
        pair = S.frontier[0]
    else:
        raise UsageError("the scene has several frontier pairs; choose one with --pair")
    lo, hi = pair
    gamma = S.strata[lo]
    if args.base:
        bases = [_floats(b, "--base") for b in args.base]
        if any(len(b) != S.box.dim for b in bases):
            raise UsageError(f"base points need {S.box.dim} coordinates")
    elif scene.base_points.get(lo):
        bases = [tuple(b) for b in scene.base_points[lo]]
    elif isinstance(gamma, PointStratum):
        bases = [tuple(gamma.point)]
    else:
        bases = [tuple(map(float, b)) for b in base_points(gamma, args.base_grid or 5, S.box, params.seed)]
    if args.condition in ("af", "wf") and scene.function is None:
        raise UsageError(f"condition {args.condition} needs a scene with a function")
    params = params.with_(declared=scene.declared_wings(lo, hi))
    out = Path(args.out)
    verdicts = []
    for k, y in enumerate(bases):
        report = check_many([args.condition], gamma, S.strata[hi], y, params, scene.function)[args.condition]
        write_report(report, out, f"{lo}_{hi}_{k}_{args.condition}")
        verdicts.append(report.verdict)
        base = ", ".join(f"{v:.6g}" for v in report.base)
        print(
            f"{args.condition} {lo}<{hi} at ({base}): {report.verdict}"
            f"  C={report.constant:.6g} slope={report.slope:.4g}"
        )
    if FAILS in verdicts:
        return EXIT_FAILS
    return EXIT_OK if all(v == HOLDS for v in verdicts) else EXIT_INCONCLUSIVE


def _variables(e) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, BinOp):
        return _variables(e.left) | _variables(e.right)
    if isinstance(e, Unary):
        return _variables(e.arg)
    return set()


def _polynomial_scene(text: str) -> Scene:
    names = ["x", "y", "z"]
    try:
        e = parse(text, names)
    except ValueError as exc:
        raise UsageError(f"{text!r} is neither a scene nor a polynomial in x, y, z: {exc}") from None
    n = max(2, max(_variables(e), default=0) + 1)
    try:
        p = Polynomial.from_expr(e, n)
    except ValueError as exc:
        raise UsageError(f"{text!r} is not a polynomial: {exc}") from None
    try:
        S = initial_decomposition(p)
    except NotSquareFree:
        raise UsageError(f"{text} has a repeated factor; pass its square-free part") from None
    return scene_from_stratification(S, text, names[:n], polynomial=text)


def cmd_stratify(args) -> int:
    conditions = tuple(c for c in args.conditions.split(",") if c)
    bad = [c for c in conditions if c not in CONDITIONS]
    if bad or not conditions:
        raise UsageError(f"--conditions takes a subset of {','.join(CONDITIONS)}")
    path = Path(args.scene)
    from .gallery import scene_path

    if path.exists() or scene_path(args.scene).exists():
        scene = _scene(args.scene)
    else:
        scene = _polynomial_scene(args.scene)
    params = _params(args)
    if any(c in ("af", "wf") for c in conditions):
        if scene.function is None:
            raise UsageError("conditions af and wf need a scene with a function")
        if set(scene.function.declared_rank) != set(scene.strata):
            S, f = rank_partition(scene.stratification, scene.function, params.seed)
            scene = scene.with_stratification(S)
            scene.function = f
    state = RefinementState.from_scene(scene, params, base_grid=args.base_grid or 12)
    note = None
    try:
        state = refine(state, conditions, max_rounds=args.max_rounds)
    except NonConvergence as exc:
        state = exc.state
        note = str(exc)
    cert = certify(state, conditions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refined = scene.with_stratification(state.stratification)
    (out / "stratification.json").write_text(refined.dumps() + "\n")
    (out / "certificate.csv").write_text(cert.to_csv())
    summary = {"certificate": cert.summary(), "refinement": state.summary(), "non_convergence": note}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    for k, r in enumerate(cert.witnesses()):
        from .gallery import write_report

        write_report(r, out / "witnesses", f"{r.pair[0]}_{r.pair[1]}_{k}_{r.condition}")
    for line in state.history:
        print(line)
    if note:
        print(note)
    for s in cert.scans:
        d = s.summary()
        print(
            f"{d['condition']} {d['pair'][0]}<{d['pair'][1]}: {d['base_points']} base points,"
            f" {d['failing']} failing, {d['inconclusive']} inconclusive"
        )
    print(cert.status)
    if cert.status == CERTIFIED:
        return EXIT_OK
    return EXIT_FAILS if cert.status == REFUTED else EXIT_INCONCLUSIVE


def cmd_gallery(args) -> int:
    from .gallery import run_gallery, summary_csv, summary_table

    params = _params(args)
    out = Path(args.out)
    try:
        results = run_gallery(args.filter, params, args.seed, out, jobs=max(1, args.jobs))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(results))
    table = summary_table(results)
    (out / "summary.txt").write_text(table)
    print(table, end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILS


COMMANDS = {"check": cmd_check, "stratify": cmd_stratify, "gallery": cmd_gallery}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SceneError, NotSquareFree, UnsupportedSingularLocus, UnsupportedCriticalLocus) as exc:
        print(f"stratcheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
