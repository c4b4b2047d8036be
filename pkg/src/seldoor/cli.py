"""Command line interface.

Exit codes: 0 on success or a satisfied criterion, 1 for an analytic
negative (criterion violated, precondition not met, necessity check failed),
2 for any input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import __version__
from .adjust import AdjustmentQuery, bias_decomposition, identify
from .errors import ContractViolation, PreconditionNotMet, SeldoorError
from .graph import backdoor_criterion, selective_door_criterion, single_door_criterion
from .modelfile import ModelFile
from .montecarlo import NonlinearModelSpec, nonlinear_demo, sample_data, verify_necessity

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _load(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not UTF-8") from exc
    return ModelFile.loads(text), hashlib.sha256(raw).hexdigest()


def _emit(command, digest, body, out=None):
    report = {"tool": "seldoor", "version": __version__, "command": command}
    if digest is not None:
        report["input_sha256"] = digest
    report.update(body)
    (out or sys.stdout).write(json.dumps(report, indent=2) + "\n")


def _split(values):
    out = []
    for v in values or []:
        out.extend(x for x in v.split(",") if x)
    return out


def _query(g, args):
    return AdjustmentQuery.create(g, args.outcome, args.treatment, _split(args.adjust))


def cmd_check(args):
    mf, digest = _load(args.model)
    g = mf.graph()
    q = _query(g, args)
    if args.criterion == "selective":
        res = selective_door_criterion(g, q.covariates, q.treatment, q.outcome, strict=args.strict_defn)
    elif args.criterion == "backdoor":
        res = backdoor_criterion(g, q.covariates, q.treatment, q.outcome)
    else:
        res = single_door_criterion(g, q.covariates, q.treatment, q.outcome)
    body = {"query": q.describe(g), "strict": bool(args.strict_defn)}
    body.update(res.describe(g))
    _emit("check", digest, body)
    return EXIT_OK if res.satisfied else EXIT_NEGATIVE


def cmd_effect(args):
    mf, digest = _load(args.model)
    m = mf.model()
    q = _query(m.graph, args)
    rep = identify(m, q)
    body = {
        "query": q.describe(m.graph),
        "criterion": rep.criterion.describe(m.graph),
        "beta": rep.beta,
        "tau": rep.tau,
        "gamma": rep.gamma,
        "total_effect": rep.total_effect,
        "naive_bias": rep.naive_bias,
        "naive_bias_note": "beta - total_effect, for context only; gamma is the bias",
    }
    _emit("effect", digest, body)
    return EXIT_OK


def cmd_bias(args):
    mf, digest = _load(args.model)
    m = mf.model()
    g = m.graph
    q = _query(g, args)
    try:
        led = bias_decomposition(m, q)
    except PreconditionNotMet as exc:
        body = {"query": q.describe(g), "error": "precondition not met", "detail": str(exc)}
        if exc.witness is not None:
            body["witness"] = exc.witness.render(g)
        _emit("bias", digest, body)
        return EXIT_NEGATIVE
    body = {
        "query": q.describe(g),
        "s1": [g.names[k] for k in sorted(led.partition.s1)],
        "s2": [g.names[k] for k in sorted(led.partition.s2)],
        "gamma": led.gamma,
        "gamma_from_ledger": led.rhs,
        "agrees": led.agrees,
        "ledger": [
            {
                "vertex": g.names[t.vertex],
                "gamma": t.gamma,
                "tau": t.tau,
                "contribution": t.contribution,
            }
            for t in led.terms
        ],
    }
    _emit("bias", digest, body)
    return EXIT_OK


def cmd_verify(args):
    mf, digest = _load(args.model)
    g = mf.graph()
    q = _query(g, args)
    if args.trials < 0:
        raise InputError("--trials must be non-negative")
    s = verify_necessity(g, q, args.trials, args.seed, args.tol)
    body = {
        "query": q.describe(g),
        "trials": s.trials,
        "seed": args.seed,
        "tol_eq": s.tol_eq,
        "criterion_verdict": s.criterion_verdict,
        "agree_count": s.agree_count,
        "allowed_fraction": s.allowed_fraction,
        "passed": s.passed,
        "disagreements": [{"trial": t, "seed": sd, "gamma": gm} for t, sd, gm in s.disagreements],
    }
    _emit("verify", digest, body)
    return EXIT_OK if s.passed else EXIT_NEGATIVE


def cmd_simulate(args):
    mf, _ = _load(args.model)
    m = mf.model()
    if args.n < 0:
        raise InputError("--n must be non-negative")
    d = sample_data(m, args.n, args.seed, args.dist)
    if args.out in (None, "-"):
        d.to_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            d.to_csv(fh)
    return EXIT_OK


def _parse_grid(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad --grid {text!r}") from exc


def _points(rep):
    out = []
    for k, x in enumerate(rep.grid):
        pt = {
            "x": float(x),
            "delta": float(rep.delta[k]),
            "delta_se": float(rep.delta_se[k]),
            "total": float(rep.total[k]),
        }
        if rep.delta_closed_form is not None:
            pt["delta_closed_form"] = float(rep.delta_closed_form[k])
        out.append(pt)
    return out


def cmd_nonlinear_demo(args):
    digest = None
    spec = NonlinearModelSpec()
    if args.spec:
        try:
            with open(args.spec, "rb") as fh:
                raw = fh.read()
            fields = json.loads(raw)
            spec = NonlinearModelSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in fields.items()})
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"bad spec file: {exc}") from exc
        digest = hashlib.sha256(raw).hexdigest()
    grid = _parse_grid(args.grid)
    rep = nonlinear_demo(spec, grid, args.n, args.seed)
    body = {
        "spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "n": args.n,
        "seed": args.seed,
        "beta_MX": rep.beta_MX,
        "a_YH_hat": rep.a_YH,
        "tau": rep.tau,
        "tau_linear_sem": rep.linear_total_effect,
        "points": _points(rep),
    }
    body["spec"]["error_sd"] = list(spec.error_sd)
    _emit("nonlinear-demo", digest, body)
    return EXIT_OK


def _add_query(p):
    p.add_argument("model", help="JSON model file")
    p.add_argument("--outcome", required=True)
    p.add_argument("--treatment", required=True)
    p.add_argument("--adjust", action="append", default=[],
                   help="covariate name(s); repeat or comma-separate")


def build_parser():
    ap = argparse.ArgumentParser(prog="seldoor", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"seldoor {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate an adjustment criterion")
    _add_query(p)
    p.add_argument("--criterion", choices=["selective", "backdoor", "singledoor"], default="selective")
    p.add_argument("--strict-defn", action="store_true",
                   help="block a conditioned descendant's back-door paths without the treatment")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("effect", help="regression coefficient versus controlled total effect")
    _add_query(p)
    p.set_defaults(func=cmd_effect)

    p = sub.add_parser("bias", help="post-treatment bias ledger")
    _add_query(p)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("verify", help="Monte Carlo check that the criterion is also necessary")
    _add_query(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="sample a dataset as CSV")
    p.add_argument("model")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--dist", choices=["gaussian", "uniform", "exponential"], default="gaussian")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nonlinear-demo", help="product-interaction example")
    p.add_argument("--spec", default=None, help="JSON file overriding NonlinearModelSpec fields")
    p.add_argument("--grid", default="-2,-1,0,1,2",
                   help="evenly spaced treatment levels; write --grid=-2,... when the first is negative")
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_nonlinear_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractViolation:
        raise
    except (InputError, SeldoorError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"seldoor: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
