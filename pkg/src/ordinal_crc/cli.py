"""Command-line entry point.

Scores files are CSV with header ``label,p0,p1,...,p{K-1}`` (UTF-8, ``.``
decimal, no index column); ``predict`` also accepts files without the
label column.  Exit codes: 0 success, 1 usage/config/data error,
2 infeasible calibration, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import LossSurface, binary_lambda, exact_lambda, jump_diagnostics
from .core import (
    CalibrationResult,
    Dataset,
    InfeasibleError,
    LossSpec,
    OrdinalCRCError,
    ValidationError,
    WeightScheme,
    check_alpha,
)
from .evaluation import TrialPlan, alpha_for_target_size, detect_saturation
from .sets import chain_table
from .simgen import simulate

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3
FLOAT_FMT = "%.12g"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- file formats -----------------------------------------------------------

def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_scores_csv(scores: np.ndarray, labels: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label"] + [f"p{i}" for i in range(scores.shape[1])])
    for y, row in zip(labels, scores):
        w.writerow([int(y)] + [FLOAT_FMT % v for v in row])
    return buf.getvalue()


def read_scores_csv(path, require_labels: bool = True):
    """Return ``(scores, labels)``; labels is None for an unlabelled file."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        has_label = bool(header) and header[0] == "label"
        pcols = header[1:] if has_label else header
        if not pcols or pcols != [f"p{i}" for i in range(len(pcols))]:
            raise ValidationError(f"{path}: header must be label,p0,...,p{{K-1}}")
        if require_labels and not has_label:
            raise ValidationError(f"{path}: missing label column")
        width = len(header)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise ValidationError(f"{path}:{lineno}: inconsistent class count")
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    arr = np.array(rows)
    if has_label:
        return arr[:, 1:], arr[:, 0]
    return arr, None


def load_dataset(path) -> Dataset:
    scores, labels = read_scores_csv(path)
    return Dataset(scores, labels)


def parse_weights(source: str, K: int) -> WeightScheme:
    if source == "equal":
        return WeightScheme.equal(K)
    if source == "linear":
        return WeightScheme.linear(K)
    if source.startswith("file:"):
        w = WeightScheme.from_file(source[5:])
        if w.K != K:
            raise ValidationError(f"weights file has {w.K} entries for K={K}")
        return w
    raise ValidationError(f"unknown weights source {source!r} (equal, linear, file:<path>)")


def make_loss(kind: str, weights: str, K: int) -> LossSpec:
    if kind == "divergence":
        if K < 2:
            raise ValidationError("divergence loss needs K >= 2")
        return LossSpec.divergence()
    return LossSpec.weighted(parse_weights(weights, K))


def resolve_threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("ORDINAL_CRC_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError("ORDINAL_CRC_THREADS must be an integer") from None
    return None


def _fraction(name):
    def parse(text):
        v = float(text)
        if not 0.0 < v < 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0, 1)")
        return v
    return parse


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _alpha_list(text):
    alphas = [float(a) for a in text.split(",") if a.strip()]
    if not alphas:
        raise argparse.ArgumentTypeError("empty alpha list")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return alphas


# -- commands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.classes < 2:
        raise ValidationError("--classes must be >= 2")
    data = simulate(args.classes, args.per_class, args.seed, args.temperature)
    atomic_write(args.out, format_scores_csv(data.scores, data.labels))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    data = load_dataset(args.scores)
    loss = make_loss(args.loss, args.weights, data.K)
    surface = LossSurface(chain_table(data.scores, loss), data.labels, loss)
    alpha = check_alpha(args.alpha)
    if args.method == "binary":
        lam, delta = binary_lambda(surface, alpha, args.delta), args.delta
    else:
        lam, delta = exact_lambda(surface, alpha), None
    result = CalibrationResult(lam, alpha, len(data), args.method, loss, surface.total(lam), delta)
    diag = jump_diagnostics(surface, loss)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "lambda_hat": result.lambda_hat,
        "alpha": result.alpha,
        "n": result.n,
        "K": data.K,
        "method": result.method,
        "delta": result.delta,
        "loss": loss.to_dict(),
        "empirical_sum": result.empirical_sum,
        "budget": result.budget,
        "M": diag.max_collision_M,
        "max_jump": diag.max_empirical_jump,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_predict(args) -> int:
    scores, _ = read_scores_csv(args.scores, require_labels=False)
    data = Dataset(scores, np.zeros(len(scores), dtype=int))
    K = data.K
    if args.calibration:
        try:
            cal = json.loads(Path(args.calibration).read_text(encoding="utf-8"))
            lam = float(cal["lambda_hat"])
            cal_K = int(cal["K"])
            loss = LossSpec.from_dict(cal["loss"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{args.calibration}: malformed calibration file ({exc})") from None
        if cal_K != K:
            raise ValidationError(f"K mismatch: calibration has K={cal_K}, scores have K={K}")
    else:
        lam = args.lam
        loss = make_loss(args.loss, args.weights, K)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    table = chain_table(data.scores, loss)
    lo, hi = table.bounds_at(lam)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lower", "upper", "width", "centroid", "point_prediction"])
    for a, b, yh in zip(lo, hi, table.yhat):
        w.writerow([int(a), int(b), int(b - a + 1), f"{(a + b) / 2:g}", int(yh)])
    if args.out:
        atomic_write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = load_dataset(args.scores)
    loss = make_loss(args.loss, args.weights, data.K)
    plan = TrialPlan(data, loss, args.trials, args.split, args.seed)
    threads = resolve_threads(args.threads)
    alphas = list(args.alphas)
    target_alpha = None
    if args.target_size is not None:
        target_alpha = alpha_for_target_size(plan, loss, args.target_size, tol=args.size_tol)
        alphas.append(target_alpha)
    reports = [plan.run(a, threads) for a in alphas]
    sweep = reports[: len(args.alphas)]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "scores": str(args.scores),
        "K": data.K,
        "loss": loss.to_dict(),
        "trials": args.trials,
        "split": args.split,
        "seed": args.seed,
        "saturation_alpha": detect_saturation(sweep),
        "target_size": args.target_size,
        "target_alpha": target_alpha,
        "reports": [r.to_dict() for r in reports],
    }
    out = Path(args.out_dir)
    atomic_write(out / "report.json", json.dumps(payload, indent=2) + "\n")

    curve = io.StringIO()
    cw = csv.writer(curve, lineterminator="\n")
    cw.writerow(["alpha", "mean_risk", "risk_se", "mean_set_size"])
    for r in reports:
        cw.writerow([FLOAT_FMT % r.alpha, FLOAT_FMT % r.mean_risk, FLOAT_FMT % r.risk_se,
                     FLOAT_FMT % r.mean_set_size])
    atomic_write(out / "risk_curve.csv", curve.getvalue())

    cents = io.StringIO()
    cw = csv.writer(cents, lineterminator="\n")
    cw.writerow(["alpha", "centroid", "count"])
    for r in reports:
        for c, k in sorted(r.centroid_histogram.items()):
            cw.writerow([FLOAT_FMT % r.alpha, f"{c:g}", k])
    atomic_write(out / "centroids.csv", cents.getvalue())
    for r in reports:
        print(f"alpha={r.alpha:.6g} risk={r.mean_risk:.4f}±{r.risk_se:.4f} size={r.mean_set_size:.3f}")
    if payload["saturation_alpha"] is not None:
        print(f"risk saturates from alpha={payload['saturation_alpha']:.6g}")
    return EXIT_OK


def _loss_args(p):
    p.add_argument("--loss", choices=["weighted", "divergence"], default="weighted")
    p.add_argument("--weights", default="equal", help="equal | linear | file:<path>")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ordinal-crc", description="Conformal risk control for ordinal classification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a simulated scores CSV")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=_positive_float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="compute lambda_hat from a labelled scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--alpha", type=_fraction("alpha"), required=True)
    _loss_args(p)
    p.add_argument("--method", choices=["exact", "binary"], default="exact")
    p.add_argument("--delta", type=_positive_float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="prediction sets for a scores CSV")
    p.add_argument("--scores", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--calibration")
    _loss_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated split trials over an alpha grid")
    p.add_argument("--scores", required=True)
    p.add_argument("--alphas", type=_alpha_list, default=[0.02, 0.08, 0.14, 0.20])
    _loss_args(p)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--split", type=_fraction("split"), default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-size", type=float)
    p.add_argument("--size-tol", type=_positive_float, default=0.05)
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OrdinalCRCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
