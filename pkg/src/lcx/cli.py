"""Command line front end: ``lcx <command> [options]``.

Exit codes: 0 verified / all checks passed, 1 invalid input, schema error or a
failed check, 2 undecided at the requested tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import certio
from .topology import SeqSpec, SpecError, UndecidedError
from .verify import EXIT_INVALID, EXIT_OK, EXIT_UNDECIDED, exit_code, verify_document, verify_path


def _spec(args) -> SeqSpec:
    return SeqSpec.parse(args.spec_rule, args.spec_override or ())


def _write_json(obj: dict, path) -> None:
    if path:
        certio.write(obj, path)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _undecided(args, exc: UndecidedError, command: str) -> int:
    doc = {
        "schema": certio.SCHEMA,
        "kind": "undecided-report",
        "command": command,
        "message": str(exc),
        "tol": certio.dec(args.tol),
        "seed": str(args.seed),
        "membership_report": exc.report.to_json() if exc.report is not None else None,
    }
    _write_json(doc, args.out)
    print(f"undecided: {exc}", file=sys.stderr)
    return EXIT_UNDECIDED


def _finish_certificate(args, doc: dict) -> int:
    """Write the certificate, then verify it from its serialized form alone."""
    text = certio.dumps(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    report = verify_document(json.loads(text))
    code = exit_code(report)
    status = {EXIT_OK: "verified", EXIT_UNDECIDED: "undecided"}.get(code, "verification failed")
    esc = doc["escape"]
    print(f"{doc['kind']}: {status}; escape {esc['value']} (bound {esc.get('bound', '1.0')})")
    for name, ok, detail in report.checks:
        if not ok:
            print(f"  failed: {name} {detail}", file=sys.stderr)
    return code


def _jets_csv(path, f, interval, r: int, samples: int = 201) -> None:
    from .core import jets_1d

    xs = np.linspace(interval[0], interval[1], samples)
    jets = jets_1d(f, xs, r)
    header = ["x", "f"] + [f"f^({j})" for j in range(1, r + 1)]
    _write_csv(path, header, ([x] + list(jets[:, i]) for i, x in enumerate(xs)))


# ---------------------------------------------------------------------------
# commands


def cmd_witness_line(args) -> int:
    from .core import support_bound
    from .line import witness_line

    spec = _spec(args)
    target = SeqSpec.parse(args.target_rule) if args.target_rule else None
    try:
        cert = witness_line(spec, target, args.tol, args.seed) if target else witness_line(spec, tol=args.tol,
                                                                                           seed=args.seed)
    except UndecidedError as exc:
        return _undecided(args, exc, "witness-line")
    if args.csv:
        g = cert.exprs["gamma_m"]
        _jets_csv(args.csv, g, support_bound(g)[0], cert.k0 + 1)
    return _finish_certificate(args, cert.to_json())


def cmd_witness_bundle(args) -> int:
    from .bundle import FibrePathology, PatchManifold, witness_bundle

    spec = _spec(args)
    k0 = spec.k_at(0)
    manifold = PatchManifold.parse(args.patches, args.dim) if args.patches else PatchManifold.default(args.dim, k0 + 2)
    P = FibrePathology(manifold, args.lambda_index)
    try:
        cert = witness_bundle(spec, P, args.fibre_dim, args.tol, args.seed)
    except UndecidedError as exc:
        return _undecided(args, exc, "witness-bundle")
    return _finish_certificate(args, cert.to_json())


def cmd_verify(args) -> int:
    code, report, msg = verify_path(args.certificate)
    print(f"{args.certificate}: {msg}")
    if args.out and report is not None:
        _write_json({"schema": certio.SCHEMA, "kind": "verify-report", **report.to_json()}, args.out)
    return code


def cmd_deriv_check(args) -> int:
    from .calculus import composition_derivative_check, f_line_derivative_check
    from .randomized import random_quadruple

    if args.r_max < 0:
        raise SpecError("r-max must be non-negative")
    rng = np.random.default_rng(args.seed)
    cases = []
    for i in range(args.trials):
        q = random_quadruple(rng)
        rep = composition_derivative_check(*q, r_max=args.r_max, slope_threshold=args.slope_threshold)
        cases.append(("composition", i, rep))
        if args.with_f_line:
            rep = f_line_derivative_check(q[0], q[2], r_max=args.r_max, slope_threshold=args.slope_threshold)
            cases.append(("f_line", i, rep))
    passed = all(rep.passed for _, _, rep in cases)
    doc = {
        "schema": certio.SCHEMA,
        "kind": "deriv-report",
        "seed": str(args.seed),
        "r_max": str(args.r_max),
        "slope_threshold": certio.dec(args.slope_threshold),
        "pass": passed,
        "cases": [{"operator": op, "index": str(i), **rep.to_json()} for op, i, rep in cases],
    }
    _write_json(doc, args.out)
    if args.csv:
        rows = ((op, i, t, e) for op, i, rep in cases for t, e in zip(rep.t_grid, rep.errors))
        _write_csv(args.csv, ["operator", "case", "t", "error"], rows)
    print(f"deriv-check: {sum(r.passed for _, _, r in cases)}/{len(cases)} passed")
    return EXIT_OK if passed else EXIT_INVALID


def cmd_bilinear(args) -> int:
    from .acceptance import random_spec, random_U
    from .algebra import leibniz_bound_check, mult_discontinuity_witness, verify_mult
    from .randomized import random_bump

    rng = np.random.default_rng(args.seed)
    witnesses = []
    try:
        for _ in range(args.witnesses):
            cert = mult_discontinuity_witness(random_U(rng), random_spec(rng), args.tol, args.seed)
            doc = cert.to_json()
            witnesses.append((doc, verify_mult(json.loads(certio.dumps(doc))).ok))
    except UndecidedError as exc:
        return _undecided(args, exc, "bilinear")
    leibniz = []
    for _ in range(args.trials):
        g = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        e = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        lo = float(rng.uniform(-1.5, 1.0))
        leibniz.append(leibniz_bound_check(g, e, (lo, lo + float(rng.uniform(0.2, 1.5))), int(rng.integers(0, 5))))
    passed = all(ok for _, ok in witnesses) and all(r.passed for r in leibniz)
    out = {
        "schema": certio.SCHEMA,
        "kind": "bilinear-report",
        "seed": str(args.seed),
        "pass": passed,
        "witnesses": [dict(doc, verified=ok) for doc, ok in witnesses],
        "leibniz": [r.to_json() for r in leibniz],
    }
    _write_json(out, args.out)
    print(f"bilinear: {sum(ok for _, ok in witnesses)}/{len(witnesses)} witnesses verified, "
          f"Leibniz {sum(r.passed for r in leibniz)}/{len(leibniz)}")
    return EXIT_OK if passed else EXIT_INVALID


def cmd_algebra(args) -> int:
    from .algebra import algebra_suite

    rep = algebra_suite(args.trials, args.seed)
    _write_json(rep.to_json(), args.out)
    print(f"algebra: {args.trials} trials, max relative errors {rep.to_json()['max_rel_error']}")
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_acceptance(args) -> int:
    from .acceptance import run_all

    which = [int(c) for c in args.only.split(",")] if args.only else None
    results = run_all(args.seed, which)
    for r in results:
        print(r.line(), flush=True)
    passed = all(r.passed for r in results)
    _write_json({"schema": certio.SCHEMA, "kind": "acceptance-report", "seed": str(args.seed), "pass": passed,
                 "criteria": [r.to_json() for r in results]}, args.out)
    return EXIT_OK if passed else EXIT_INVALID


# ---------------------------------------------------------------------------
# parser


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol=1e-2):
        p.add_argument("--out", help="output JSON path")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized suites (recorded in outputs)")
        p.add_argument("--tol", type=_positive, default=tol, help="bracket tolerance relative to eps")

    def spec_args(p):
        p.add_argument("--spec-rule", default="constant:0:1",
                       help="constant:K:EPS | abs:EPS | affine:A:B:EPS, optionally :harmonic")
        p.add_argument("--spec-override", action="append", metavar="N:K:EPS", help="override (k_n, eps_n); repeatable")

    p = sub.add_parser("witness-line", help="certificate that the line pathology is discontinuous")
    common(p)
    spec_args(p)
    p.add_argument("--target-rule", help="target neighbourhood spec (default abs:1)")
    p.add_argument("--csv", help="write x, f, f', ... of gamma_m")
    p.set_defaults(func=cmd_witness_line)

    p = sub.add_parser("witness-bundle", help="certificate for the bundle pathology")
    common(p)
    spec_args(p)
    p.add_argument("--dim", type=int, default=2, help="base dimension d")
    p.add_argument("--fibre-dim", type=int, default=1, help="fibre dimension p")
    p.add_argument("--lambda-index", type=int, default=0, help="fibre coordinate read by the pathology")
    p.add_argument("--patches", help="N (default layout) or c1,..,cd@w;c1,..,cd@w;...")
    p.set_defaults(func=cmd_witness_bundle)

    p = sub.add_parser("verify", help="re-verify a certificate file")
    p.add_argument("certificate")
    p.add_argument("--out", help="write the verification report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("deriv-check", help="difference quotients vs closed-form derivatives")
    p.add_argument("--out")
    p.add_argument("--csv", help="write operator, case, t, error rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--r-max", type=int, default=2, help="highest x-derivative compared")
    p.add_argument("--slope-threshold", type=float, default=0.9)
    p.add_argument("--with-f-line", action="store_true", help="also check the line pathology's derivative")
    p.set_defaults(func=cmd_deriv_check)

    p = sub.add_parser("bilinear", help="multiplication witnesses and Leibniz bounds")
    common(p)
    p.add_argument("--witnesses", type=int, default=10)
    p.add_argument("--trials", type=int, default=100, help="random Leibniz pairs")
    p.set_defaults(func=cmd_bilinear)

    p = sub.add_parser("algebra", help="identities of the triangular-matrix algebra")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_algebra)

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", help="comma separated criterion numbers")
    p.set_defaults(func=cmd_acceptance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; report those as invalid input
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (SpecError, certio.SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
