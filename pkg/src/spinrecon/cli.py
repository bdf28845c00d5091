"""Command-line interface: ``spinrecon <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 reconstruction FAILED.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import SpinReconError
from .majorana import classify_genericity, roots_from_state
from .parent import CERTIFY_MAX_TWO_S, certify_uniqueness_argument
from .spin import PureState
from .tomography import (
    ORTHOGONAL,
    DataSet,
    ReconstructionConfig,
    ReconVerdict,
    brute_force_oracle,
    conjugate_partner_check,
    noise_sweep,
    reconstruct,
    simulate_dataset,
    sweep_to_csv,
    validate_axes,
)

SCHEMA = "spinrecon/1"
RENORM_TOL = 1e-6

log = logging.getLogger("spinrecon")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = 2):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("UsageError", message)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _shot_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.lower() in ("inf", "exact"):
            out.append(None)
            continue
        value = _positive_int(part)
        out.append(value)
    return out


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("SchemaError", f"{path}: {exc}") from None


def _load_state(path) -> PureState:
    obj = _load_json(path)
    try:
        return PureState.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpinReconError):
            raise
        raise CliError("SchemaError", f"{path}: bad PureState: {exc}") from None


def _load_axes(path):
    if path is None:
        return ORTHOGONAL
    obj = _load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("axes", obj)
    try:
        vectors = [v["n"] if isinstance(v, dict) else v for v in obj]
    except (TypeError, KeyError) as exc:
        raise CliError("SchemaError", f"{path}: bad axes: {exc}") from None
    return validate_axes(vectors)


def _load_dataset(path) -> DataSet:
    obj = _load_json(path)
    try:
        probs = [np.asarray(p, dtype=float) for p in obj["probabilities"]]
        fixed = []
        for k, p in enumerate(probs):
            total = p.sum()
            if abs(total - 1) > RENORM_TOL:
                raise CliError("SchemaError", f"probability vector {k} sums to {total!r}")
            if total != 1:
                if abs(total - 1) > 1e-12:
                    log.warning("renormalizing probability vector %d (sum %r)", k, total)
                p = p / total
            fixed.append(p.tolist())
        obj = dict(obj, probabilities=fixed)
        return DataSet.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise CliError("SchemaError", f"{path}: bad DataSet: {exc}") from None


def _emit(payload, out):
    if isinstance(payload, dict):
        payload = dict(payload, schema=SCHEMA)
        text = json.dumps(payload, sort_keys=True) + "\n"
    else:
        text = payload
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --- subcommands ----------------------------------------------------------


def cmd_simulate(args):
    state = _load_state(args.state)
    axes = _load_axes(args.axes)
    shots = None
    if args.shots is not None:
        shots = _shot_list(args.shots)
        if len(shots) == 1:
            shots = shots * 3
        if len(shots) != 3 or any(n is None for n in shots):
            raise CliError("UsageError", "--shots takes one or three positive integers")
    data = simulate_dataset(state, axes, shots, args.seed)
    _emit(data.to_json(), args.out)
    return 0


def cmd_reconstruct(args):
    data = _load_dataset(args.data)
    config = ReconstructionConfig(restarts=args.restarts, seed=args.seed, accept_tol=args.tol)
    result = reconstruct(data, config)
    _emit(result.to_json(), args.out)
    return 3 if result.verdict is ReconVerdict.FAILED else 0


def cmd_roots(args):
    _emit(roots_from_state(_load_state(args.state)).to_json(), args.out)
    return 0


def cmd_classify(args):
    report = classify_genericity(_load_state(args.state), args.tol)
    _emit(report.to_json(), args.out)
    return 0


def cmd_verify_parent(args):
    state = _load_state(args.state)
    cap = min(args.max_spin_check, CERTIFY_MAX_TWO_S)
    if state.two_s > cap:
        raise CliError("DimensionTooLarge", f"two_s={state.two_s} exceeds check cap {cap}")
    report = certify_uniqueness_argument(state, args.trials, args.seed,
                                         tol=args.tol if args.tol else 1e-10)
    _emit(report.to_json(), args.out)
    return 0


def cmd_ambiguity(args):
    state = _load_state(args.state)
    if args.data is not None:
        data = _load_dataset(args.data)
    else:
        data = simulate_dataset(state, _load_axes(args.axes))
    check = conjugate_partner_check(state, data, accept_tol=args.tol)
    payload = dict(check, partner=check["partner"].to_json())
    if args.grid is not None:
        if state.two_s > 2:
            raise CliError("OracleTooExpensive", "--grid needs two_s <= 2")
        payload["oracle"] = [c.to_json() for c in brute_force_oracle(data, args.grid, args.tol)]
    _emit(payload, args.out)
    return 0


def cmd_noise_sweep(args):
    state = _load_state(args.state)
    axes = _load_axes(args.axes)
    grid = _shot_list(args.shots) if args.shots else [100, 1000, 10000, 100000]
    rows = noise_sweep(state, axes, grid, args.repeats, args.seed, args.restarts)
    _emit(sweep_to_csv(rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spinrecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=SCHEMA)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=_non_negative_int, default=0)
        return p

    p = add("simulate", cmd_simulate, "simulate a dataset from a state")
    p.add_argument("--state", required=True)
    p.add_argument("--axes")
    p.add_argument("--shots", help="one count or a,b,c per axis; omit for exact data")

    p = add("reconstruct", cmd_reconstruct, "reconstruct states from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--restarts", type=_positive_int, default=50)
    p.add_argument("--tol", type=_positive_float, help="acceptance residual")

    p = add("roots", cmd_roots, "Majorana roots of a state")
    p.add_argument("--state", required=True)

    p = add("classify", cmd_classify, "genericity of a state")
    p.add_argument("--state", required=True)
    p.add_argument("--tol", type=_positive_float, help="recombination tolerance")

    p = add("verify-parent", cmd_verify_parent, "parent-space certificate for a state")
    p.add_argument("--state", required=True)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--max-spin-check", type=_positive_int, default=CERTIFY_MAX_TWO_S,
                   help="largest two_s accepted")

    p = add("ambiguity", cmd_ambiguity, "conjugate-partner check and optional brute-force oracle")
    p.add_argument("--state", required=True)
    p.add_argument("--data")
    p.add_argument("--axes")
    p.add_argument("--tol", type=_positive_float, help="acceptance residual")
    p.add_argument("--grid", type=_positive_int, help="oracle grid points per phase")

    p = add("noise-sweep", cmd_noise_sweep, "infidelity versus shot count, as CSV")
    p.add_argument("--state", required=True)
    p.add_argument("--axes")
    p.add_argument("--shots", help="comma-separated shot grid; 'inf' for exact")
    p.add_argument("--repeats", type=_non_negative_int, default=20)
    p.add_argument("--restarts", type=_positive_int, default=50)
    return parser


def _report_error(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "schema": SCHEMA}) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as exc:
        _report_error(exc.kind, str(exc))
        return exc.code
    except SpinReconError as exc:
        _report_error(type(exc).__name__, str(exc))
        return 2


def run(argv=None):
    sys.exit(main(argv))
