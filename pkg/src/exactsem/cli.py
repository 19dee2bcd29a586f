"""Command-line front end.

Exit codes: 0 success (or exact), 1 checked and not exact, 2 invalid input or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__, documents
from .constructors import aggregate_micro_macro, equilibrate, marginalize_childless, marginalize_nonintervened
from .demos import DEMOS, build_demo
from .errors import CertificationError, ExactSemError
from .sem import sample, solve_given_noise
from .transform import CheckConfig, check_exact

EXIT_OK, EXIT_NOT_EXACT, EXIT_ERROR = 0, 1, 2


def _load_json_arg(value, what):
    """A path to a JSON file, or inline JSON text."""
    path = Path(value)
    if path.is_file():
        return documents.load(path)
    try:
        return json.loads(value)
    except json.JSONDecodeError as err:
        raise ExactSemError(f"--{what}: {value!r} is neither a file nor valid JSON "
                            f"({err.msg} at column {err.colno})") from None


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _config(args):
    return CheckConfig(grid=args.grid, random=args.random, samples=args.samples, alpha=args.alpha,
                       tol=args.tol, permutations=args.permutations, seed=args.seed,
                       force_monte_carlo=args.monte_carlo)


def _write_triple(out, model_doc, tau, omega, report):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "model.json", documents.dumps(model_doc))
    _write(out / "tau.json", documents.dumps(documents.tau_to_doc(tau)))
    _write(out / "omega.json", documents.dumps(documents.omega_to_doc(omega)))
    _write(out / "report.json", documents.dumps(documents.report_to_doc(report, __version__)))


def _emit_triple(args, triple):
    print(triple.report.summary())
    if args.out:
        _write_triple(args.out, documents.model_to_doc(triple.model), triple.tau, triple.omega,
                      triple.report)
        print(f"wrote {args.out}/{{model,tau,omega,report}}.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    doc = documents.load(args.model)
    src = documents.source_from_doc(doc)
    if hasattr(src, "structure"):
        st = src.structure
        print(f"ok: {len(src.variables)} variables, {'acyclic' if st.acyclic else 'cyclic'}, "
              f"{'linear' if st.linear is not None else 'nonlinear'}, "
              f"{len(src.catalog)} intervention families")
    else:
        print(f"ok: dynamical process over {len(src.variables)} coordinates, ||A||_2 = {src.norm:.6g}, "
              f"{len(src.catalog)} clamp families")
    return EXIT_OK


def cmd_solve(args):
    sem = documents.model_from_doc(documents.load(args.model))
    i = documents.intervention_from_doc(_load_json_arg(args.intervention, "intervention"),
                                        "intervention", set(sem.variables))
    e = _load_json_arg(args.noise, "noise")
    if not isinstance(e, dict):
        raise ExactSemError("--noise must be a JSON object of exogenous values")
    x = solve_given_noise(sem, i, e)
    print(json.dumps(x, sort_keys=True))
    return EXIT_OK


def cmd_sample(args):
    sem = documents.model_from_doc(documents.load(args.model))
    i = documents.intervention_from_doc(_load_json_arg(args.intervention, "intervention"),
                                        "intervention", set(sem.variables))
    X = sample(sem, i, args.n, args.seed)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(sem.variables)
        for row in X:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_check_exact(args):
    source = documents.source_from_doc(documents.load(args.source))
    target = documents.model_from_doc(documents.load(args.target))
    tau = documents.tau_from_doc(documents.load(args.tau))
    omega = documents.omega_from_doc(documents.load(args.omega))
    report = check_exact(source, target, tau, omega, _config(args))
    print(report.summary())
    if args.out:
        _write(args.out, documents.dumps(documents.report_to_doc(report, __version__)))
    return EXIT_OK if report.exact else EXIT_NOT_EXACT


def cmd_marginalize(args):
    sem = documents.model_from_doc(documents.load(args.model))
    drop = [v.strip() for v in args.drop.split(",") if v.strip()]
    build = marginalize_childless if args.mode == "childless" else marginalize_nonintervened
    return _emit_triple(args, build(sem, drop, config=_config(args)))


def cmd_aggregate(args):
    sem = documents.model_from_doc(documents.load(args.model))
    split = lambda s: tuple(v.strip() for v in s.split(",")) if s else None
    return _emit_triple(args, aggregate_micro_macro(sem, split(args.w), split(args.z),
                                                    config=_config(args)))


def cmd_equilibrate(args):
    spec = documents.dynamics_from_doc(documents.load(args.spec))
    return _emit_triple(args, equilibrate(spec, config=_config(args)))


def cmd_demo(args):
    scenario = build_demo(args.name, args.seed)
    report = check_exact(scenario.source, scenario.target, scenario.tau, scenario.omega, _config(args))
    print(f"{scenario.name}: {scenario.description}")
    print(report.summary())
    expected = "exact" if scenario.expected_exact else "not exact"
    got = "exact" if report.exact else "not exact"
    print(f"documented verdict: {expected}; observed: {got}")
    if args.out:
        out = Path(args.out)
        src = scenario.source
        src_doc = documents.model_to_doc(src) if hasattr(src, "equations") else documents.dynamics_to_doc(src)
        _write(out / "source.json", documents.dumps(src_doc))
        _write_triple(out, documents.model_to_doc(scenario.target), scenario.tau, scenario.omega, report)
    return EXIT_OK if report.exact else EXIT_NOT_EXACT


# --------------------------------------------------------------------------
# parser


def _check_flags(p, seed_required=True):
    p.add_argument("--grid", type=int, default=3, help="grid points per bounded axis")
    p.add_argument("--random", type=int, default=5, help="random probes per family")
    p.add_argument("--samples", type=int, default=50_000, help="Monte Carlo draws per side")
    p.add_argument("--alpha", type=float, default=0.01, help="energy-test level")
    p.add_argument("--tol", type=float, default=1e-9, help="closed-form moment tolerance")
    p.add_argument("--permutations", type=int, default=200)
    p.add_argument("--monte-carlo", action="store_true", help="never use closed-form laws")
    p.add_argument("--seed", type=int, required=seed_required)


def build_parser():
    parser = argparse.ArgumentParser(prog="exactsem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"exactsem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a model or dynamics document")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve the intervened equations for one noise assignment")
    p.add_argument("--model", required=True)
    p.add_argument("--intervention", default="{}", help="JSON file or inline JSON object")
    p.add_argument("--noise", required=True, help="JSON file or inline object of exogenous values")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sample", help="draw samples under an intervention (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--intervention", default="{}")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check-exact", help="decide whether (target, tau, omega) is exact for source")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--tau", required=True)
    p.add_argument("--omega", required=True)
    p.add_argument("--out")
    _check_flags(p)
    p.set_defaults(func=cmd_check_exact)

    p = sub.add_parser("marginalize", help="marginalise childless or never-intervened variables")
    p.add_argument("--model", required=True)
    p.add_argument("--drop", required=True, help="comma-separated variables")
    p.add_argument("--mode", choices=("childless", "nonintervened"), required=True)
    p.add_argument("--out")
    _check_flags(p)
    p.set_defaults(func=cmd_marginalize)

    p = sub.add_parser("aggregate", help="average micro layers W, Z into a macro model")
    p.add_argument("--model", required=True)
    p.add_argument("--w", help="comma-separated W layer (default: noise-only variables)")
    p.add_argument("--z", help="comma-separated Z layer (default: the rest)")
    p.add_argument("--out")
    _check_flags(p)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("equilibrate", help="equilibrium SEM of a linear dynamical process")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    _check_flags(p)
    p.set_defaults(func=cmd_equilibrate)

    p = sub.add_parser("demo", help="run a bundled scenario")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--out")
    _check_flags(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CertificationError as err:
        if err.report is not None:
            print(err.report.summary(), file=sys.stderr)
        print(f"error: {err}", file=sys.stderr)
    except ExactSemError as err:
        where = getattr(err, "intervention", None)
        print(f"error: {err}" + (f" (under {where})" if where is not None else ""), file=sys.stderr)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
