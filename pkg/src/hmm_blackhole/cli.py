"""Command-line front end.

Entropies are computed in nats; ``--bits`` rescales entropy-valued columns
only when printing.  Tables are CSV with a header row and 17 significant
digits; structured results (classification witnesses, breakdowns) are JSON.

Exit codes: 0 success, 2 invalid input, 3 computation guard, 4 parameters
outside the regime an operation is defined for.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bsc as bsc_mod
from . import combinatorics, deriv_formula, entropy
from .errors import GuardError, ModelError, RegimeViolation
from .hmm_core import HiddenMarkovModel
from .jets import ModelCurve

EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_REGIME = 4


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(header, rows, path=None, out=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    else:
        (out or sys.stdout).write(text)


def write_json(data, path=None, out=None):
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        (out or sys.stdout).write(text)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ModelError(f"cannot parse number list {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ModelError("grid must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ModelError("grid needs at least one point")
        return np.linspace(start, stop, count).tolist()
    return parse_floats(text)


def parse_lengths(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


class Presenter:
    def __init__(self, bits: bool):
        self.scale = 1.0 / math.log(2.0) if bits else 1.0
        self.unit = "bits" if bits else "nats"

    def __call__(self, v):
        return None if v is None else v * self.scale


def _pi_matrix(text: str) -> np.ndarray:
    values = parse_floats(text)
    if len(values) != 4:
        raise ModelError("expected four transition probabilities pi00,pi01,pi10,pi11")
    return np.array(values).reshape(2, 2)


def _params(args, eps=None) -> bsc_mod.BinaryChainParams:
    if args.pi is None:
        raise ModelError("--pi is required")
    return bsc_mod.BinaryChainParams.from_flat(parse_floats(args.pi), args.eps if eps is None else eps)


def _model(args) -> HiddenMarkovModel:
    if getattr(args, "model", None):
        if args.pi is not None:
            raise ModelError("give either --model or --pi, not both")
        return HiddenMarkovModel.from_json(args.model)
    if args.pi is None:
        raise ModelError("a model source is required: --model FILE or --pi with --eps")
    if args.eps is None:
        raise ModelError("--eps is required with --pi")
    return ModelCurve.bsc(_pi_matrix(args.pi)).model_at(args.eps)


def _curve(args) -> ModelCurve:
    if getattr(args, "model_curve", None):
        if args.pi is not None:
            raise ModelError("give either --model-curve or --pi, not both")
        return ModelCurve.from_json(args.model_curve)
    if args.pi is None:
        raise ModelError("a curve source is required: --model-curve FILE or --pi")
    return ModelCurve.bsc(_pi_matrix(args.pi))


def cmd_entropy(args, show):
    m = _model(args)
    if args.sequence:
        seq = entropy.entropy_sequence(m, args.n)
        write_csv(["n", f"H_n_{show.unit}"], [(k, show(v)) for k, v in enumerate(seq.values)], args.csv)
    else:
        print(fmt(show(entropy.h_n(m, args.n))))
    return 0


def cmd_derivative(args, show):
    curve = _curve(args)
    if args.lengths:
        rows = []
        for n in parse_lengths(args.lengths):
            jet = entropy.h_n(curve, n, args.at, args.order)
            rows.append((n, show(jet.derivative(args.order))))
        write_csv(["n", f"d{args.order}H_n"], rows, args.csv)
        return 0
    res = entropy.stabilized_derivative(curve, args.at, args.order)
    write_json(
        {
            "order": res.order,
            "at": res.at,
            "value": show(res.value),
            "length": res.length,
            "long_length": res.long_length,
            "long_value": show(res.long_value),
            "pre_length": res.pre_length,
            "pre_value": show(res.pre_value),
            "consistent": res.consistent,
            "unit": show.unit,
        },
        args.json,
    )
    return 0


def cmd_bsc(args, show):
    p = _params(args)
    if args.bsc_command == "classify":
        data = bsc_mod.classify_support(p).to_dict()
        data["xi"] = bsc_mod.max_output_probability(p)
        write_json(data, args.json)
    elif args.bsc_command == "support":
        pts = bsc_mod.support_points(p, args.level)
        write_csv(["index", "x"], list(enumerate(pts)), args.csv)
    elif args.bsc_command == "bounds":
        rows = []
        for n in range(args.start, args.level + 1):
            b = bsc_mod.entropy_bounds(p, n)
            rows.append((n, show(b.lower), show(b.upper), show(b.width)))
        write_csv(["level", "lower", "upper", "width"], rows, args.csv)
    elif args.bsc_command == "cylinder":
        cyl = bsc_mod.cylinder_level(p, args.level)
        rows = [
            (cyl.word_string(i), cyl.points[i], cyl.probs[i], cyl.lo[i], cyl.hi[i])
            for i in range(len(cyl.points))
        ]
        write_csv(["word", "point", "prob", "lo", "hi"], rows, args.csv)
    return 0


def cmd_hpz(args, show):
    p = _params(args)
    b = deriv_formula.hpz_derivative(p, args.level, args.quad, args.method, args.quad_tol)
    data = b.to_dict()
    for key in ("term1", "term2", "term3", "term4", "total", "term1_total_derivative"):
        data[key] = show(data[key])
    data["unit"] = show.unit
    if args.reference is not None:
        ref = entropy.h_n(bsc_mod.bsc_curve(p), args.reference, p.epsilon, 1).derivative(1)
        data["reference_level"] = args.reference
        data["reference"] = show(ref)
        data["reference_gap"] = show(abs(b.total - ref))
    write_json(data, args.json)
    return 0


def cmd_lowsnr(args, show):
    p = _params(args, eps=0.5)
    closed = deriv_formula.low_snr_second_derivative(p)
    print(f"closed_form {fmt(show(closed))}")
    rows = []
    for n in range(args.start, args.check_level + 1, args.step):
        c = deriv_formula.low_snr_numeric_check(p, n)
        rows.append((n, show(c.jet_value), show(c.closed_form), show(c.gap), show(c.first_derivative), show(c.value)))
    write_csv(["n", "jet_second", "closed_form", "gap", "jet_first", "value"], rows, args.csv)
    return 0


def cmd_coeffs(args, show):
    terms = combinatorics.yprime_over_y_expansion(args.order)
    if args.format == "json":
        write_json([{"partition": list(p), "C": str(c)} for p, c in terms], args.output)
    else:
        write_csv(["partition", "C"], [(" ".join(map(str, p)), str(c)) for p, c in terms], args.output)
    return 0


def sweep_rows(pi_values, grid, n, level, mirror):
    pi = np.array(pi_values, dtype=float).reshape(2, 2)
    curve = ModelCurve.bsc(pi)
    points = sorted(set(grid) | ({1.0 - e for e in grid} if mirror else set()))
    rows = []
    for eps in points:
        h = entropy.h_n(curve.model_at(eps), n)
        lower = upper = None
        kind = ""
        if eps <= 0.5:
            p = bsc_mod.BinaryChainParams(pi, eps)
            if p.standard_regime or abs(p.det) <= 1e-12:
                try:
                    sc = bsc_mod.classify_support(p)
                    kind = sc.kind.value
                    if sc.non_overlapping:
                        b = bsc_mod.entropy_bounds(p, level)
                        lower, upper = b.lower, b.upper
                except RegimeViolation:
                    kind = ""
        rows.append((eps, h, lower, upper, kind))
    return rows


def cmd_sweep(args, show):
    grid = parse_grid(args.grid)
    if any(not 0 <= e <= 0.5 for e in grid):
        raise ModelError("sweep grid must lie in [0, 1/2]; use --mirror for the reflected half")
    if args.pi is None:
        raise ModelError("--pi is required")
    rows = sweep_rows(_pi_matrix(args.pi), grid, args.n, args.level, args.mirror)
    out = [(e, show(h), show(lo), show(hi), k) for e, h, lo, hi, k in rows]
    write_csv(["eps", "H_n", "lower", "upper", "class"], out, args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmm-blackhole", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bits", action="store_true", help="report entropies in bits instead of nats")
    sub = parser.add_subparsers(dest="command", required=True)

    def pi_args(p, eps=True, eps_required=False):
        p.add_argument("--pi", help="binary chain as pi00,pi01,pi10,pi11")
        if eps:
            p.add_argument("--eps", type=float, required=eps_required, help="channel crossover probability")

    p = sub.add_parser("entropy", parents=[common], help="conditional entropy H_n of a hidden Markov chain")
    p.add_argument("--model", help="model JSON with 'delta' and 'phi'")
    pi_args(p)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--sequence", action="store_true", help="emit H_0..H_n as CSV")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("derivative", parents=[common], help="parameter derivatives of H_n via jets")
    p.add_argument("--model-curve", help="curve JSON: {'pi': ...} or {'delta_coeffs': ..., 'phi': ...}")
    pi_args(p, eps=False)
    p.add_argument("--at", type=float, default=0.0)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--lengths", help="explicit n values, e.g. 1-8 or 2,4,6; default is the stabilized derivative")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_derivative)

    p = sub.add_parser("bsc", parents=[common], help="Blackwell measure of a binary chain through a BSC")
    bsub = p.add_subparsers(dest="bsc_command", required=True)
    for name, helptext in (
        ("classify", "support classification with witnesses (JSON)"),
        ("support", "level-n images of the fixed points (CSV)"),
        ("bounds", "cylinder entropy bounds per level (CSV)"),
        ("cylinder", "level-n cylinder points, masses and intervals (CSV)"),
    ):
        q = bsub.add_parser(name, parents=[common], help=helptext)
        pi_args(q, eps_required=True)
        q.add_argument("--level", type=int, default=10)
        q.add_argument("--start", type=int, default=1, help="first level for bounds")
        q.add_argument("--csv")
        q.add_argument("--json")
    p.set_defaults(func=cmd_bsc)

    p = sub.add_parser("hpz", parents=[common], help="four-term first-derivative breakdown (JSON)")
    pi_args(p, eps_required=True)
    p.add_argument("--level", type=int, default=12)
    p.add_argument("--quad", type=int, default=4097, help="Simpson node count over I")
    p.add_argument("--quad-tol", type=float, default=deriv_formula.QUAD_TOL)
    p.add_argument("--method", choices=("simpson", "exact"), default="simpson")
    p.add_argument("--reference", type=int, help="also report the jet derivative of H at this length")
    p.add_argument("--json")
    p.set_defaults(func=cmd_hpz)

    p = sub.add_parser("lowsnr", parents=[common], help="second derivative at eps = 1/2")
    pi_args(p, eps=False)
    p.add_argument("--check-level", type=int, default=14)
    p.add_argument("--start", type=int, default=2)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_lowsnr)

    p = sub.add_parser("coeffs", parents=[common], help="coefficients of the (y'/y)^(n) expansion")
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("sweep", parents=[common], help="H_n, bounds and class over an eps grid (CSV)")
    pi_args(p, eps=False)
    p.add_argument("--grid", default="0.01:0.5:50", help="start:stop:count or a comma list, within [0, 1/2]")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--level", type=int, default=10, help="cylinder level for the bounds columns")
    p.add_argument("--mirror", action="store_true", help="add the reflected points 1 - eps")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    return parser


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    show = Presenter(getattr(args, "bits", False))
    try:
        return int(args.func(args, show) or 0)
    except RegimeViolation as exc:
        return _fail(EXIT_REGIME, exc)
    except (GuardError, ArithmeticError) as exc:
        return _fail(EXIT_GUARD, exc)
    except (ModelError, OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
