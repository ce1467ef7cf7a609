"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import homogeneous as hom
from .freetree import ResourceError, build_ball
from .model import (
    ConstantField,
    FieldSpec,
    GbcAssignment,
    ModelParams,
    _generator,
    check_marginal_consistency,
    field_from_json,
    realize_field,
    solve_inward,
)
from .sampler import IncompatibleError, sample_configuration
from .uniqueness import iterate_psi, uniqueness_verdict

log = logging.getLogger("pottstree")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Mismatch(Exception):
    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


# output helpers ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".17g")


def _clean(obj: Any) -> Any:
    """Make numpy scalars and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def dump_json(obj: Any) -> str:
    # repr-based float formatting is shortest round-trip, i.e. full precision
    return json.dumps(_clean(obj), indent=2) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# argument checks --------------------------------------------------------------

def _need(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _check_kq(args: argparse.Namespace) -> None:
    _need(args, "k", "q")
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    if args.q < 2:
        raise UsageError(f"--q must be >= 2, got {args.q}")


def _check_theta(theta: float) -> None:
    if not (theta > 0 and math.isfinite(theta)):
        raise UsageError(f"--theta must be positive and finite, got {theta}")


def _load_field(path: str | None, q: int) -> FieldSpec:
    if path is None:
        return ConstantField((0.0,) * (q - 1))
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return field_from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: bad field spec ({exc})") from exc


# subcommands -----------------------------------------------------------------

def cmd_constants(args: argparse.Namespace) -> int:
    _check_kq(args)
    cc = hom.critical_constants(args.k, args.q)
    out = {"k": args.k, "q": args.q, **cc.to_json()}
    for m, t in enumerate(cc.theta_m, start=1):
        out[f"theta_{m}"] = t
    for m, t in enumerate(cc.theta_m0, start=1):
        out[f"theta_{m}_0"] = t
    emit(dump_json(out), args.out)
    return EXIT_OK


def _theta_grid(args: argparse.Namespace) -> np.ndarray:
    _need(args, "theta_min", "theta_max")
    steps = 200 if args.steps is None else args.steps
    if steps < 2:
        raise UsageError("--steps must be >= 2")
    if not 0 < args.theta_min < args.theta_max:
        raise UsageError("need 0 < --theta-min < --theta-max")
    return np.linspace(args.theta_min, args.theta_max, steps)


def curve_rows(cs: hom.CurveSample) -> tuple[list[str], list[list[str]]]:
    q2 = cs.alpha_m.shape[1]
    header = ["theta", "alpha_minus", "alpha_plus"] + [f"alpha_{m}" for m in range(1, q2 + 1)]
    rows = [[_fmt(t), _fmt(a), _fmt(b)] + [_fmt(x) for x in am]
            for t, a, b, am in zip(cs.theta, cs.alpha_minus, cs.alpha_plus, cs.alpha_m)]
    return header, rows


def gnuplot_stub(csv_path: str, header: Sequence[str]) -> str:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'theta'",
        "set ylabel 'alpha'",
    ]
    plots = [f"'{csv_path}' using 1:{i + 1} with lines" for i in range(1, len(header))]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_curves(args: argparse.Namespace) -> int:
    _check_kq(args)
    grid = _theta_grid(args)
    cs = hom.curves(args.k, args.q, grid)
    for w in cs.warnings:
        log.warning(w)
    if args.format == "json":
        text = dump_json({"k": args.k, "q": args.q, "theta": cs.theta, "alpha_minus": cs.alpha_minus,
                          "alpha_plus": cs.alpha_plus, "alpha_m": cs.alpha_m, "warnings": cs.warnings})
        emit(text, args.out)
        return EXIT_OK
    header, rows = curve_rows(cs)
    emit(_csv_text(header, rows), args.out)
    if args.gnuplot_stub:
        if not args.out:
            raise UsageError("--gnuplot-stub needs --out (the script references the CSV file)")
        write_atomic(str(args.out) + ".gp", gnuplot_stub(os.path.basename(args.out), header))
    return EXIT_OK


def cmd_count(args: argparse.Namespace) -> int:
    _check_kq(args)
    _need(args, "theta", "alpha")
    _check_theta(args.theta)
    k, q, theta, alpha = args.k, args.q, args.theta, args.alpha
    if args.oracle and q > 6:
        raise UsageError("--oracle is unsupported for q > 6")
    if args.oracle and args.seed is None:
        raise UsageError("--oracle draws random start points and needs --seed")
    if alpha == 0:
        nu = hom.count_zero_field(k, q, theta)
        out: dict[str, Any] = {"k": k, "q": q, "theta": theta, "alpha": alpha, "nu": nu, "tangent_band": False}
        tangent = False
    else:
        rep = hom.count_total(k, q, theta, alpha)
        out = {"k": k, "q": q, "theta": theta, "alpha": alpha, **rep.to_json()}
        nu, tangent = rep.nu, rep.tangent
    if args.oracle:
        sols = hom.oracle_enumerate(k, q, theta, alpha, seed=args.seed)
        out["oracle"] = {
            "count": len(sols),
            "solutions": [{"z": s.z, "kind": s.kind, "m": s.m, "residual": s.residual} for s in sols],
        }
        if len(sols) != nu and not tangent:
            emit(dump_json(out), args.out)
            raise Mismatch(f"classifier count {nu} != oracle count {len(sols)}")
    emit(dump_json(out), args.out)
    return EXIT_OK


def cmd_uniqueness(args: argparse.Namespace) -> int:
    _check_kq(args)
    _need(args, "theta")
    _check_theta(args.theta)
    spec = _load_field(args.field, args.q)
    v = uniqueness_verdict(args.k, args.q, args.theta, spec)
    emit(dump_json({"k": args.k, "q": args.q, "field": spec.to_json(), **v.to_json()}), args.out)
    print(v.verdict, file=sys.stderr)
    return EXIT_OK


def _need_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise UsageError("this command is stochastic and needs --seed")
    return args.seed


def _ball(args: argparse.Namespace, default: int | None = None):
    depth = default if args.depth is None else args.depth
    if depth is None:
        raise UsageError("missing required flag --depth")
    if depth < 1:
        raise UsageError("--depth must be >= 1")
    try:
        return build_ball(args.k, depth)
    except ResourceError as exc:
        raise UsageError(str(exc)) from exc


def cmd_iterate(args: argparse.Namespace) -> int:
    _check_kq(args)
    _need(args, "theta")
    _check_theta(args.theta)
    seed = _need_seed(args)
    ball = _ball(args)
    spec = _load_field(args.field, args.q)
    xi = realize_field(spec, ball, args.q, seed)
    lt = abs(math.log(args.theta))
    g0 = (2 * _generator(seed, "start").random((ball.size, args.q - 1)) - 1) * lt
    tol = 1e-12 if args.tol is None else args.tol
    tr = iterate_psi(ball, xi, args.theta, g0, tol=tol)
    emit(dump_json({"k": args.k, "q": args.q, "theta": args.theta, "seed": seed, **tr.to_json()}), args.out)
    final = tr.updates[-1] if tr.updates else 0.0
    print(f"converged={tr.converged} sweeps={tr.sweeps} final_update={final:.3e}", file=sys.stderr)
    return EXIT_OK if tr.converged else EXIT_MISMATCH


def cmd_sample(args: argparse.Namespace) -> int:
    _check_kq(args)
    _need(args, "theta")
    _check_theta(args.theta)
    seed = _need_seed(args)
    ball = _ball(args)
    count = 1 if args.n_samples is None else args.n_samples
    if count < 1:
        raise UsageError("--n-samples must be >= 1")
    spec = _load_field(args.field, args.q)
    xi = realize_field(spec, ball, args.q, seed)
    # free boundary: zero field on the leaves, propagated inwards
    gbc = solve_inward(ball, xi, args.theta, np.zeros((len(ball.leaves), args.q - 1)))
    smp = sample_configuration(gbc, xi, args.theta, count=count, seed=seed)
    labels = ball.labels()
    if args.format == "json":
        text = dump_json({"seed": seed, "depth": smp.depth, "vertices": labels, "spins": smp.spins})
    else:
        rows = [[str(s), labels[i], str(int(v))] for s, row in enumerate(smp.spins) for i, v in enumerate(row)]
        text = _csv_text(["sample", "vertex", "spin"], rows)
    emit(text, args.out)
    return EXIT_OK


def cmd_verify_compat(args: argparse.Namespace) -> int:
    _check_kq(args)
    _need(args, "theta")
    _check_theta(args.theta)
    seed = _need_seed(args)
    depth = 1 if args.depth is None else args.depth
    if depth < 1:
        raise UsageError("--depth must be >= 1")
    # mu_n is compared with the marginal of mu_{n+1}, so h lives on V_{n+1}
    ball = build_ball(args.k, depth + 1)
    trials = 20 if args.trials is None else args.trials
    params = ModelParams(args.k, args.q, args.theta)
    rng = _generator(seed, "verify-compat")
    q1 = args.q - 1
    target = ball.sphere(depth).start
    rows = []
    failures = 0
    for t in range(trials):
        xi = rng.normal(size=(ball.size, q1))
        gbc = solve_inward(ball, xi, args.theta, rng.normal(size=(len(ball.leaves), q1)))
        rep = check_marginal_consistency(params, xi, gbc, depth)
        bad = gbc.h.copy()
        bad[target] += 0.1 * rng.standard_normal(q1)
        bad_rep = check_marginal_consistency(params, xi, GbcAssignment(ball, bad), depth)
        ok = rep.agrees and bad_rep.agrees and rep.consistent and not bad_rep.consistent
        failures += not ok
        rows.append({"trial": t, "residual": rep.residual_sphere, "tv": rep.tv,
                     "perturbed_residual": bad_rep.residual_sphere, "perturbed_tv": bad_rep.tv, "iff_holds": ok})
    out = {"k": args.k, "q": args.q, "theta": args.theta, "depth": depth, "seed": seed,
           "trials": trials, "consistent": trials - failures, "instances": rows}
    emit(dump_json(out), args.out)
    print(f"{trials - failures}/{trials} consistent", file=sys.stderr)
    if failures:
        raise Mismatch(f"{failures} trial(s) broke the compatibility iff")
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "constants": cmd_constants,
    "curves": cmd_curves,
    "count": cmd_count,
    "uniqueness": cmd_uniqueness,
    "iterate": cmd_iterate,
    "sample": cmd_sample,
    "verify-compat": cmd_verify_compat,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=int)
    common.add_argument("--q", type=int)
    common.add_argument("--theta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--theta-min", type=float)
    common.add_argument("--theta-max", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--field", metavar="PATH")
    common.add_argument("--depth", type=int)
    common.add_argument("--n-samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--oracle", action="store_true")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--trials", type=int)
    common.add_argument("--gnuplot-stub", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pottstree", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (hom.DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IncompatibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except Mismatch as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
