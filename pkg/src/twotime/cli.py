"""``twotime`` command-line tool.

Machine-readable output goes to stdout (or ``--out``); a short summary goes
to stderr.  Exit status: 0 success, 1 verification failure or non-finite
numbers, 2 bad input or usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import io as tio
from .channels import Instrument
from .errors import (DimensionMismatch, MissingSlots, NotCPTP, OutcomeIndexError, ParseError,
                     TwoTimeError)
from .postselect import Variant, conditional_stats, entangled_ancilla_protocol, mixed_state_protocol, sample_shots
from .process import ProcessMatrix, prob_w, random_valid_w, validate_w
from .report import VerificationReport
from .sampling import make_rng, random_instrument
from .states import contract_table, eta_to_w, is_linear, prob_eta, prob_pure, validate_eta_conditions, w_to_eta
from .tensor import A1, A2, B1, B2, DEFAULT_TOL, LabeledTensor
from .verify import TheoremCheckConfig, check_theorem_eta, compare_representations

log = logging.getLogger("twotime")

INPUT_ERRORS = (ParseError, DimensionMismatch, MissingSlots, NotCPTP, OutcomeIndexError,
                FileNotFoundError, IsADirectoryError)


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------------

def _load(path: str, *expected):
    obj = tio.load(path)
    if expected and not isinstance(obj, expected):
        names = " or ".join(t.__name__ for t in expected)
        raise UsageError(f"{path}: expected {names}, got {type(obj).__name__}")
    return obj


def _instrument(path: str, src, dst) -> Instrument:
    return _load(path, Instrument).on(src, dst)


def _dims(text: str, n: int) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--dims must be comma-separated integers, got {text!r}") from None
    if len(dims) != n or min(dims) < 1:
        raise UsageError(f"--dims needs {n} positive integers, got {text!r}")
    return dims


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2 ** 63))
        log.warning("no --seed given; using %d", args.seed)
    return args.seed


def _table(name: str, values, **extra) -> dict:
    return {"name": name, "values": np.asarray(values, dtype=float).tolist(), **extra}


def _finite(x) -> bool:
    if isinstance(x, float):
        return math.isfinite(x)
    if isinstance(x, dict):
        return all(_finite(v) for v in x.values())
    if isinstance(x, (list, tuple)):
        return all(_finite(v) for v in x)
    return True


def _scrub(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _scrub(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_scrub(v) for v in x]
    return x


class Run:
    """Collects checks and tables for one invocation."""

    def __init__(self, args, inputs: dict, params: dict):
        self.manifest = {"subcommand": args.command, "inputs": inputs, "parameters": params,
                         "version": __version__,
                         "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        self.checks: list[dict] = []
        self.tables: list[dict] = []

    def add_report(self, report: VerificationReport, prefix: str = "") -> None:
        for c in report.checks:
            d = c.to_dict()
            d["name"] = prefix + d["name"]
            self.checks.append(d)

    def add_check(self, name: str, residual: float, tol: float) -> None:
        residual = float(residual)
        self.checks.append({"name": name, "residual": residual, "tol": tol,
                            "pass": bool(math.isfinite(residual) and residual <= tol)})

    def document(self) -> tuple[dict, int]:
        doc = {"manifest": self.manifest, "checks": self.checks, "tables": self.tables}
        code = 0 if all(c["pass"] for c in self.checks) else 1
        if not _finite(doc):
            doc = _scrub(doc)
            doc["numerical_failure"] = {"error": "NumericalFailure",
                                        "message": "non-finite value in report"}
            code = 1
        return doc, code


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finish(run: Run, args) -> int:
    doc, code = run.document()
    _emit(json.dumps(doc, indent=1, allow_nan=False) + "\n", getattr(args, "out", None))
    for c in run.checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: residual={c['residual']}",
              file=sys.stderr)
    print("ok" if code == 0 else "verification failed", file=sys.stderr)
    return code


# -- subcommands ---------------------------------------------------------------------

def cmd_validate_w(args) -> int:
    W = _load(args.inp, ProcessMatrix)
    run = Run(args, {"in": args.inp}, {"tol": args.tol})
    report = validate_w(W, args.tol)
    run.add_report(report)
    run.tables.append({"name": "min_eigenvalue", "values": report.details["min_eigenvalue"]})
    return _finish(run, args)


def cmd_validate_eta(args) -> int:
    eta = _load(args.inp, LabeledTensor)
    seed = _seed(args)
    run = Run(args, {"in": args.inp}, {"tol": args.tol, "seed": seed, "trials": args.trials})
    run.add_report(validate_eta_conditions(eta, args.tol))
    lin = is_linear(eta, n_samples=args.trials, seed=seed, tol=args.tol)
    run.add_report(lin)
    run.tables.append(_table("linearity_values", lin.details["values"]))
    return _finish(run, args)


def cmd_w2eta(args) -> int:
    W = _load(args.inp, ProcessMatrix)
    _emit(tio.dumps(w_to_eta(W)), args.out)
    print(f"converted W {W.dims} to density vector", file=sys.stderr)
    return 0


def cmd_eta2w(args) -> int:
    eta = _load(args.inp, LabeledTensor)
    W = eta_to_w(eta)
    _emit(tio.dumps(W), args.out)
    print(f"converted density vector to W {W.dims}", file=sys.stderr)
    return 0


def cmd_prob(args) -> int:
    if (args.w is None) == (args.eta is None):
        raise UsageError("give exactly one of --w and --eta")
    alice = _instrument(args.alice, A1, A2)
    bob = _instrument(args.bob, B1, B2)
    inputs = {"w": args.w, "eta": args.eta, "alice": args.alice, "bob": args.bob}
    run = Run(args, inputs, {"tol": args.tol})
    if args.w is not None:
        W = _load(args.w, ProcessMatrix)
        table = prob_w(W, alice, bob, tol=args.tol, check_normalization=False)
    else:
        eta = _load(args.eta, LabeledTensor)
        raw = contract_table(eta, alice, bob)
        run.add_check("real_valued", np.max(np.abs(raw.imag)), args.tol)
        table = raw.real
        run.tables.append(_table("normalized", prob_eta(eta, alice, bob)))
    run.add_check("normalization", abs(table.sum() - 1), args.tol)
    run.add_check("nonnegativity", max(0.0, -float(table.min())), args.tol)
    run.tables.insert(0, _table("probabilities", table, axes=["alice", "bob"]))
    return _finish(run, args)


def cmd_simulate(args) -> int:
    state = _load(args.state, ProcessMatrix, LabeledTensor)
    inputs = {"state": args.state, "alice": args.alice, "bob": args.bob}
    params = {"protocol": args.protocol, "tol": args.tol, "shots": args.shots}
    if args.protocol == Variant.PURE_SINGLE_PARTY.value:
        if args.bob is not None:
            raise UsageError("fig1 takes no --bob")
        if isinstance(state, ProcessMatrix):
            raise UsageError("fig1 needs a single-party two-time state, not W")
        proto = entangled_ancilla_protocol(state)
        alice, bob = _instrument(args.alice, A1, A2), None
        pure = not any(lab.dagger for lab in state.labels)
        closed = prob_pure(state, alice) if pure else prob_eta(state, alice)
    else:
        if args.bob is None:
            raise UsageError("fig3 needs --bob")
        proto = mixed_state_protocol(state)
        alice, bob = _instrument(args.alice, A1, A2), _instrument(args.bob, B1, B2)
        eta = w_to_eta(state) if isinstance(state, ProcessMatrix) else state
        closed = prob_eta(eta, alice, bob)
    if args.shots:
        params["seed"] = _seed(args)
    run = Run(args, inputs, params)
    table, success = conditional_stats(proto, alice, bob)
    run.add_check("matches_two_time_rule", np.max(np.abs(table - closed)), args.tol)
    run.tables.append(_table("conditional", table))
    run.tables.append({"name": "success_probability", "values": success})
    run.tables.append({"name": "flags", "values": proto.flags})
    if args.shots:
        counts = sample_shots(proto, alice, bob, args.shots, args.seed)
        run.tables.append(_table("kept_counts", counts.kept))
        run.tables.append(_table("discarded_counts", counts.discarded))
        run.tables.append(_table("kept_frequencies", counts.frequencies()))
    return _finish(run, args)


def _histogram(name: str, values) -> dict:
    logs = np.log10(np.maximum(np.asarray(values, dtype=float), 1e-300))
    counts, edges = np.histogram(logs, bins=np.arange(-18, 1))
    return {"name": f"{name}_log10_histogram", "values": counts.tolist(), "bin_edges": edges.tolist()}


def cmd_check_theorem(args) -> int:
    target = _load(args.target, ProcessMatrix, LabeledTensor)
    seed = _seed(args)
    cfg = TheoremCheckConfig(n_trials=args.trials, seed=seed, tol=args.tol)
    run = Run(args, {"target": args.target}, {"tol": args.tol, "seed": seed, "trials": args.trials})
    if isinstance(target, ProcessMatrix):
        rep_w, rep_eta, gap = compare_representations(target, cfg)
        run.add_report(rep_w, "w.")
        run.add_report(rep_eta, "eta.")
        run.add_check("representation_agreement", gap, 1e-10)
        reports = [("w", rep_w), ("eta", rep_eta)]
    else:
        rep_eta = check_theorem_eta(target, cfg)
        run.add_report(rep_eta, "eta.")
        reports = [("eta", rep_eta)]
    for tag, rep in reports:
        for name, values in rep.details["per_trial"].items():
            run.tables.append(_histogram(f"{tag}.{name}", values))
    run.tables.append({"name": "epsilon_policy", "values": rep_eta.details["epsilon_policy"]})
    run.tables.append(_table("epsilons", rep_eta.details["epsilons"]))
    return _finish(run, args)


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.what == "w":
        obj = random_valid_w(_dims(args.dims or "2,2,2,2", 4), seed=seed)
    else:
        d_in, d_out = _dims(args.dims or "2,2", 2)
        obj = random_instrument(d_in, d_out, make_rng(seed), n_outcomes=args.outcomes)
    _emit(tio.dumps(obj), args.out)
    print(f"generated {args.what} with seed {seed}", file=sys.stderr)
    return 0


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twotime", description="Process matrices and two-time states.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="write the output document here instead of stdout")
        return sp

    sp = add("validate-w", cmd_validate_w, "check the validity conditions of W")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)

    sp = add("validate-eta", cmd_validate_eta, "check a density vector's conditions and linearity")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int, default=50)

    for name, func, what in (("w2eta", cmd_w2eta, "W to density vector"),
                             ("eta2w", cmd_eta2w, "density vector to W")):
        sp = add(name, func, what)
        sp.add_argument("--in", dest="inp", required=True)

    sp = add("prob", cmd_prob, "outcome probabilities for two instruments")
    sp.add_argument("--w")
    sp.add_argument("--eta")
    sp.add_argument("--alice", required=True)
    sp.add_argument("--bob", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("simulate", cmd_simulate, "post-selection preparation circuit")
    sp.add_argument("--protocol", choices=[v.value for v in Variant], required=True)
    sp.add_argument("--state", required=True)
    sp.add_argument("--alice", required=True)
    sp.add_argument("--bob")
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("check-theorem", cmd_check_theorem, "randomized check of the channel identities")
    sp.add_argument("--target", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float, default=1e-8)

    sp = add("gen", cmd_gen, "sample a random valid W or instrument")
    sp.add_argument("what", choices=["w", "instrument"])
    sp.add_argument("--dims")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--outcomes", type=int, default=2)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, *INPUT_ERRORS) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except TwoTimeError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
