"""Command-line front end.

Every subcommand reads a model JSON file (``-`` for stdin) except ``gen``,
which writes one.  Exit codes: 0 pass, 1 verification failure, 2 usage or
parse error.  The default seed comes from ``ATOMEXP_SEED`` when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any

import numpy as np

from . import generators
from .condexp import expectation_onto, invariant_residuals, verify_sandwich
from .matrixlab import DEFAULT_TOL
from .pipeline import run_pipeline
from .scenario import (
    BipartiteModel,
    ModelStructureError,
    ScenarioMismatch,
    behavior,
    chsh_value,
    validate_model,
)
from .steering import build_assemblage, verify_reproduction, verify_x_independence
from .tensorize import tensorize, verify_tensor_model
from .vnalg import center, commutant, generated_algebra, wedderburn

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("ATOMEXP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ATOMEXP_SEED={raw!r} is not an integer") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _blocks(text: str) -> list[tuple[int, int]]:
    try:
        out = []
        for item in text.split(","):
            n, m = item.lower().split("x")
            out.append((int(n), int(m)))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected blocks like 2x2,1x3, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default: $ATOMEXP_SEED or 0)")
    common.add_argument("--out", default=None, help="write the JSON result to this path")
    common.add_argument("--json", action="store_true", help="print JSON instead of a text summary")
    common.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")

    p = argparse.ArgumentParser(prog="atomexp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a model")
    g.add_argument("kind", choices=generators.KINDS)
    g.add_argument("--dA", type=int, default=2)
    g.add_argument("--dB", type=int, default=3)
    g.add_argument("--blocks", type=_blocks, default=[(2, 2), (1, 3)])
    g.add_argument("--n-hidden", type=int, default=4)
    g.add_argument("--alice-outcomes", type=_int_list, default=[2, 2])
    g.add_argument("--bob-outcomes", type=_int_list, default=[2, 2])
    g.add_argument("--no-obfuscate", action="store_true")
    g.add_argument("--obfuscate", action="store_true", help="conjugate the chsh model by a random unitary")
    g.add_argument("--product-state", action="store_true")

    for name, help_ in [("validate", "check model hypotheses"), ("behavior", "compute p(a,b|x,y)"),
                        ("algebra", "algebra generated by one party"),
                        ("expectation", "conditional expectation onto W*(party)"),
                        ("steer", "build the steering assemblage"),
                        ("tensorize", "build a tensor-product model"),
                        ("pipeline", "run every stage")]:
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("model", help="model JSON path or - for stdin")
        if name in ("algebra", "expectation", "tensorize", "pipeline"):
            s.add_argument("--side", choices=("alice", "bob"),
                           default="bob" if name == "expectation" else "alice")
        if name == "algebra":
            s.add_argument("--commutant", action="store_true", help="report on the commutant instead")
            s.add_argument("--wedderburn", action="store_true", help="include the block decomposition")
        if name in ("tensorize", "pipeline"):
            s.add_argument("--padding", action="store_true")
    return p


def _load_model(path: str) -> BipartiteModel:
    try:
        text = sys.stdin.read() if path == "-" else open(path).read()
        return BipartiteModel.from_json(json.loads(text))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except (json.JSONDecodeError, ModelStructureError, ValueError) as exc:
        raise UsageError(f"cannot parse model {path}: {exc}") from None


def _gen(args) -> tuple[dict, int, str]:
    kind = args.kind
    common = dict(alice_outcomes=args.alice_outcomes, bob_outcomes=args.bob_outcomes)
    if kind == "hidden-tensor":
        params = dict(dA=args.dA, dB=args.dB, obfuscate=not args.no_obfuscate,
                      product_state=args.product_state, **common)
    elif kind == "direct-sum":
        params = dict(blocks=args.blocks, obfuscate=not args.no_obfuscate, **common)
    elif kind == "classical":
        params = dict(n_hidden=args.n_hidden, **common)
    else:
        params = dict(obfuscate=args.obfuscate)
    try:
        m = generators.gen(kind, args.seed, **params)
    except generators.GeneratorError as exc:
        raise UsageError(str(exc)) from None
    return m.to_json(), EXIT_PASS, f"generated {kind} model of dimension {m.dim}"


def _validate(args, m, tol):
    r = validate_model(m, tol)
    return r.to_json(), EXIT_PASS if r.ok else EXIT_FAIL, \
        "valid" if r.ok else f"invalid: {', '.join(r.failures())}"


def _behavior(args, m, tol):
    r = validate_model(m, tol)
    if not r.ok:
        return {"validation": r.to_json()}, EXIT_FAIL, f"invalid: {', '.join(r.failures())}"
    beh = behavior(m, tol)
    out = beh.to_json()
    try:
        out["chsh"] = chsh_value(beh)
    except ScenarioMismatch:
        pass
    return out, EXIT_PASS, "chsh = %s" % out.get("chsh", "n/a")


def _algebra(args, m, tol):
    fam = m.alice if args.side == "alice" else m.bob
    gens = fam.all_elements()
    alg = commutant(m.dim, gens, tol) if args.commutant else generated_algebra(m.dim, gens, tol)
    out: dict[str, Any] = {}
    if args.wedderburn:
        out.update(wedderburn(alg, np.random.default_rng(args.seed), tol).to_json())
    else:
        out.update(algebra_dim=alg.dimension, commutant_dim=commutant(m.dim, alg.basis, tol).dimension,
                   center_dim=center(alg, tol).dimension)
    out["closure_residuals"] = alg.closure_residuals()
    ok = all(v <= tol.eps_eq for v in out["closure_residuals"].values())
    return out, EXIT_PASS if ok else EXIT_FAIL, f"algebra dimension {out['algebra_dim']}"


def _expectation(args, m, tol):
    own, other = (m.bob, m.alice) if args.side == "bob" else (m.alice, m.bob)
    cexp = expectation_onto(generated_algebra(m.dim, own.all_elements(), tol), tol, check_cp=True)
    sw = verify_sandwich(cexp, other, own, tol)
    res = invariant_residuals(cexp, np.random.default_rng(args.seed))
    ok = sw.ok and all(v <= tol.eps_eq for v in res.values())
    return {"sandwich": sw.to_json(), "residuals": res, "range_dim": cexp.target.dimension}, \
        EXIT_PASS if ok else EXIT_FAIL, "sandwich " + ("holds" if sw.ok else "fails")


def _steer(args, m, tol):
    beh = behavior(m, tol)
    cexp = expectation_onto(generated_algebra(m.dim, m.bob.all_elements(), tol), tol)
    s = build_assemblage(m, cexp, tol)
    res = {"x_independence": verify_x_independence(s), "reproduction": verify_reproduction(s, m, beh)}
    ok = all(v <= tol.eps_eq for v in res.values())
    return s.to_json(res), EXIT_PASS if ok else EXIT_FAIL, f"x-independence {res['x_independence']:.2e}, reproduction {res['reproduction']:.2e}"


def _tensorize(args, m, tol):
    beh = behavior(m, tol)
    t = tensorize(m, np.random.default_rng(args.seed), side=args.side, padding=args.padding, tol=tol)
    res = verify_tensor_model(t, beh)
    out = t.to_json()
    out["blocks"] = [{"n": a, "m": c} for a, c in t.blocks]
    out["residual"] = res
    ok = res <= tol.eps_factor
    return out, EXIT_PASS if ok else EXIT_FAIL, f"dimA={t.dimA} dimB={t.dimB} residual={res:.2e}"


def _pipeline(args, m, tol):
    r = run_pipeline(m, seed=args.seed, side=args.side, padding=args.padding, tol=tol)
    lines = [f"{s.name:12s} {s.status}" + (f"  ({s.error})" if s.error else "") for s in r.stages]
    if r.chsh:
        lines.append("chsh " + " ".join(f"{k}={v:.12f}" for k, v in r.chsh.items()))
    return r.to_json(), r.exit_code, "\n".join(lines)


COMMANDS = {"validate": _validate, "behavior": _behavior, "algebra": _algebra,
            "expectation": _expectation, "steer": _steer, "tensorize": _tensorize,
            "pipeline": _pipeline}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        try:
            tol = DEFAULT_TOL.scaled(args.tol_scale) if args.tol_scale != 1.0 else DEFAULT_TOL
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.command == "gen":
            payload, code, summary = _gen(args)
            text = json.dumps(payload)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            else:
                print(text)
            return code
        m = _load_model(args.model)
        try:
            payload, code, summary = COMMANDS[args.command](args, m, tol)
        except UsageError:
            raise
        except Exception as exc:  # numerical failure inside a stage
            payload, code, summary = {"error": f"{type(exc).__name__}: {exc}"}, EXIT_FAIL, str(exc)
    except UsageError as exc:
        print(f"atomexp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.json:
        print(text)
    else:
        print(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
