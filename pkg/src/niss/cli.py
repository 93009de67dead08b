"""Command-line front-end.

Exit codes: 0 pass, 1 semantic failure (infeasible target, violated
condition, advantage found), 2 input error. Results go to stdout (or
``--out``) as JSON; input errors print a JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from fractions import Fraction

import numpy as np

from . import feasibility as feas
from .feasibility import BinaryTarget
from .harness import RunConfig, run_affine_monte_carlo, run_patched_monte_carlo, write_reports_csv
from .quantum import (
    InvalidDistributionError,
    InvalidPovmError,
    JointDistribution,
    MalformedPovmError,
    NumericInconsistencyError,
    Povm,
    bell_joint_distribution,
    trine_povm,
    validate_povm,
)
from .sources import BivariateBinarySource, InvalidSourceError
from .synthesis import (
    AffineScheme,
    InfeasibleTargetError,
    PatchedScheme,
    SchemeInconsistencyError,
    evaluate_scheme_exact,
    synthesize_binary_scheme,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def parse_real(token, allow_sqrt: bool = False) -> float:
    """Decimal numbers, or exact fraction strings such as "2/3"."""
    if isinstance(token, bool):
        raise InputError("parse", f"not a number: {token!r}")
    if isinstance(token, (int, float)):
        return float(token)
    if not isinstance(token, str):
        raise InputError("parse", f"not a number: {token!r}")
    text = token.strip()
    if allow_sqrt and "sqrt" in text:
        # Only the built-in trine uses these tokens: "sqrt(3)/4", "-sqrt(3)/4".
        m = re.fullmatch(r"(-?)sqrt\((\d+)\)(?:/(\d+))?", text)
        if not m:
            raise InputError("parse", f"unsupported token {token!r}")
        val = math.sqrt(int(m.group(2))) / int(m.group(3) or 1)
        return -val if m.group(1) else val
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise InputError("parse", f"not a number: {token!r}") from None


def parse_complex(entry, allow_sqrt: bool = False) -> complex:
    if isinstance(entry, (list, tuple)):
        if len(entry) != 2:
            raise InputError("parse", f"complex entries are [re, im] pairs, got {entry!r}")
        return complex(parse_real(entry[0], allow_sqrt), parse_real(entry[1], allow_sqrt))
    return complex(parse_real(entry, allow_sqrt), 0.0)


def povm_from_json(obj, allow_sqrt: bool = False) -> Povm:
    if not isinstance(obj, dict) or "operators" not in obj:
        raise InputError("malformed-povm", "POVM JSON needs 'outcomes' and 'operators'")
    ops = []
    for op in obj["operators"]:
        if not isinstance(op, list) or len(op) != 2 or any(not isinstance(r, list) or len(r) != 2 for r in op):
            raise InputError("malformed-povm", "each operator must be a 2x2 array")
        ops.append(np.array([[parse_complex(v, allow_sqrt) for v in row] for row in op]))
    outcomes = obj.get("outcomes", list(range(1, len(ops) + 1)))
    try:
        return Povm(tuple(outcomes), tuple(ops))
    except MalformedPovmError as exc:
        raise InputError("malformed-povm", str(exc)) from None


TRINE_JSON = {
    "outcomes": [1, 2, 3],
    "operators": [
        [[["0", "0"], ["0", "0"]], [["0", "0"], ["2/3", "0"]]],
        [[["1/2", "0"], ["sqrt(3)/6", "0"]], [["sqrt(3)/6", "0"], ["1/6", "0"]]],
        [[["1/2", "0"], ["-sqrt(3)/6", "0"]], [["-sqrt(3)/6", "0"], ["1/6", "0"]]],
    ],
}


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError("io", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError("parse", f"{path}: invalid JSON ({exc.msg})") from None


def load_povm(path: str) -> Povm:
    return povm_from_json(load_json(path))


def load_distribution(path: str) -> JointDistribution:
    obj = load_json(path)
    if isinstance(obj, dict) and "joint" in obj and "pmf" not in obj:
        obj = obj["joint"]
    try:
        return JointDistribution.from_json(obj)
    except (InvalidDistributionError, ValueError, TypeError) as exc:
        raise InputError("invalid-distribution", str(exc)) from None


def load_binary_target(path: str) -> BinaryTarget:
    obj = load_json(path)
    try:
        if isinstance(obj, dict) and {"a", "b", "s"} <= obj.keys():
            return BinaryTarget.from_abs(float(obj["a"]), float(obj["b"]), float(obj["s"]))
        return BinaryTarget.from_joint(JointDistribution.from_json(obj))
    except (InvalidDistributionError, ValueError, TypeError, KeyError) as exc:
        raise InputError("invalid-distribution", str(exc)) from None


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _povm_pair(args) -> tuple[Povm, Povm]:
    paths = list(args.povms)
    trines = args.trine
    if len(paths) + trines != 2:
        raise InputError("usage", "give exactly two POVMs (paths and/or --trine flags)")
    povms = [load_povm(p) for p in paths]
    povms += [povm_from_json(TRINE_JSON, allow_sqrt=True) for _ in range(trines)]
    for m in povms:
        try:
            report = validate_povm(m, args.tol)
        except MalformedPovmError as exc:
            raise InputError("malformed-povm", str(exc)) from None
        if not report.passed:
            raise InputError("invalid-povm", "; ".join(report.problems))
    return povms[0], povms[1]


def cmd_measure(args) -> int:
    m1, m2 = _povm_pair(args)
    joint = bell_joint_distribution(m1, m2, args.tol)
    out = joint.to_json()
    qu, qv = joint.marginals()
    out["marginals"] = {"row": qu.tolist(), "col": qv.tolist()}
    _emit(out, args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    dist = load_distribution(args.dist)
    if args.mode == "binary":
        try:
            target = BinaryTarget.from_joint(dist)
        except ValueError as exc:
            raise InputError("invalid-distribution", str(exc)) from None
        verdict = feas.check_binary_cr_feasible(target, args.tol)
        out = {"mode": "binary", "pass": verdict.feasible, **verdict.to_json()}
        ok = verdict.feasible
    elif args.mode == "condition":
        report = feas.check_diagonal_product_condition(dist, args.condition_tol)
        out = {"mode": "condition", "pass": report.passed, **report.to_json()}
        ok = report.passed
    else:
        rank, sv = feas.rank_certificate(dist)
        ok = rank <= 2
        out = {"mode": "rank", "pass": ok, "rank_estimate": rank, "singular_values": sv}
    _emit(out, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_synthesize(args) -> int:
    target = load_binary_target(args.target)
    verdict = feas.check_binary_cr_feasible(target, args.tol)
    try:
        scheme = synthesize_binary_scheme(target, args.tol)
    except InfeasibleTargetError as exc:
        _emit({"feasible": False, "error": str(exc), "verdict": verdict.to_json()}, args.out)
        return EXIT_FAIL
    out = scheme.to_json()
    if args.verbose:
        out["exact"] = evaluate_scheme_exact(scheme).to_json()
        out["verdict"] = verdict.to_json()
    _emit(out, args.out)
    return EXIT_OK


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NISS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError("usage", f"NISS_SEED must be an integer, got {env!r}") from None


def cmd_simulate(args) -> int:
    obj = load_json(args.scheme)
    seed = _seed(args)
    try:
        if isinstance(obj, dict) and "f_plus" in obj:
            src = None
            if args.source:
                src = BivariateBinarySource(np.asarray(load_json(args.source)["pmf"], dtype=float))
            scheme = PatchedScheme.from_json(obj, src)
            cfg = RunConfig(args.n, seed, scheme.d)
            report = run_patched_monte_carlo(scheme, scheme.source, cfg)
        else:
            scheme = AffineScheme.from_json(obj)
            target = load_binary_target(args.target) if args.target else None
            report = run_affine_monte_carlo(scheme, RunConfig(args.n, seed), target)
    except (KeyError, TypeError, ValueError, InvalidSourceError) as exc:
        raise InputError("invalid-scheme", str(exc)) from None
    if args.csv:
        write_reports_csv([report], args.csv)
    _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    m1, m2 = _povm_pair(args)
    report = feas.certify_advantage(m1, m2, args.tol, args.condition_tol)
    _emit(report.to_json(), args.out)
    return EXIT_FAIL if report.advantage else EXIT_OK


def cmd_example_trine(args) -> int:
    trine = trine_povm()
    joint = bell_joint_distribution(trine, trine)
    report = feas.certify_advantage(trine, trine)
    cond = report.condition
    out = {
        "joint": joint.to_json(),
        "rank": cond.rank_estimate,
        "singular_values": list(cond.singular_values),
        "residual_1_2": cond.residual(1, 2),
        "advantage": report.advantage,
        "summary": report.summary(),
    }
    _emit(out, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="niss", description="Non-interactive source simulation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, condition=False):
        p.add_argument("--tol", type=float, default=feas.TOL, help="structural tolerance (default 1e-10)")
        if condition:
            p.add_argument("--condition-tol", type=float, default=feas.CONDITION_TOL, help="diagonal-product tolerance (default 1e-9)")
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("measure", help="Bell-state joint outcome distribution of two POVMs")
    p.add_argument("povms", nargs="*", help="POVM JSON files")
    p.add_argument("--trine", action="count", default=0, help="use the built-in trine POVM (repeatable)")
    common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("check", help="feasibility checks on a joint distribution")
    p.add_argument("dist", help="distribution JSON file")
    p.add_argument("--mode", choices=("binary", "condition", "rank"), default="binary")
    common(p, condition=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synthesize", help="affine one-shared-bit scheme for a binary target")
    p.add_argument("target", help="binary distribution JSON, or {a, b, s}")
    p.add_argument("--verbose", action="store_true", help="include exact output and verdict")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="Monte Carlo run of a scheme")
    p.add_argument("scheme", help="affine or patched scheme JSON")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None, help="defaults to $NISS_SEED, then 0")
    p.add_argument("--target", help="binary target JSON for TV (affine schemes)")
    p.add_argument("--source", help="source pmf JSON overriding the patched scheme's")
    p.add_argument("--csv", help="also write a one-row CSV summary")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="certify quantum advantage of a POVM pair")
    p.add_argument("povms", nargs="*")
    p.add_argument("--trine", action="count", default=0)
    common(p, condition=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("example-trine", help="the trine demonstration end to end")
    p.add_argument("--out")
    p.set_defaults(func=cmd_example_trine)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        err = {"error": exc.kind, "message": str(exc)}
    except (InvalidPovmError, MalformedPovmError) as exc:
        err = {"error": "invalid-povm", "message": str(exc)}
    except (InvalidDistributionError, NumericInconsistencyError, SchemeInconsistencyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(err), file=sys.stderr)
    return EXIT_INPUT



def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
