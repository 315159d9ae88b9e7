"""Command-line entry point: ``mvcheb {fit,score,bound,verify}``.

Exit codes: 0 success, 2 usage or input error, 3 a verification row fell
below its bound by more than the Monte Carlo slack.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from mvcheb.chebyshev import (
    chebyshev_coverage_bound,
    gaussian_exact_coverage,
    mahalanobis_sq,
    make_whitener,
    markov_tail_bound,
)
from mvcheb.errors import MvchebError
from mvcheb.mc import FAMILIES, MOMENTS_MODES, default_spec, verify_bound
from mvcheb.moments import DEFAULT_RANK_TOL, DIVISOR_MODES, MomentModel, fit_moments, from_moments

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3

MODEL_FORMAT = "mvcheb-model"
MODEL_VERSION = 1


class CliError(Exception):
    """Input problem reported to the user with exit code 2."""


def _machine(x: float) -> str:
    return format(float(x), ".17g")


def _human(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".6g")


def read_csv(path) -> np.ndarray:
    """Parse a numeric CSV (optional non-numeric header row) into an (N, n) array."""
    try:
        with open(path, newline="") as fh:
            records = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except (csv.Error, UnicodeDecodeError) as exc:
        raise CliError(f"{path}: malformed CSV: {exc}") from None

    def parse(cell):
        try:
            v = float(cell)
        except ValueError:
            return None
        return v

    start = 0
    if records and any(parse(c) is None for c in records[0]):
        start = 1
    rows = records[start:]
    if not rows:
        raise CliError(f"{path}: no data rows")

    width = len(records[0]) if start else len(rows[0])
    out = np.empty((len(rows), width))
    for i, rec in enumerate(rows, start=start + 1):
        if len(rec) != width:
            raise CliError(f"{path}: row {i} has {len(rec)} columns, expected {width}")
        for j, cell in enumerate(rec, start=1):
            v = parse(cell)
            if v is None or not math.isfinite(v):
                raise CliError(f"{path}: row {i}, column {j}: not a finite number: {cell.strip()!r}")
            out[i - start - 1, j - 1] = v
    return out


def model_to_json(model: MomentModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "dim": model.dim,
        "divisor": model.divisor,
        "rank_tol": model.rank_tol,
        "rank": model.rank,
        "mean": [float(v) for v in model.mean],
        "cov": [float(v) for v in model.cov.reshape(-1)],
        "eigenvalues": [float(v) for v in model.spectral.eigenvalues],
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_json(text: str) -> MomentModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"model file is not JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise CliError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} file")
    try:
        dim = int(doc["dim"])
        mean = np.array(doc["mean"], dtype=np.float64)
        cov = np.array(doc["cov"], dtype=np.float64)
        rank_tol = float(doc["rank_tol"])
        rank = int(doc["rank"])
        divisor = doc["divisor"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid model file: {exc}") from None
    if mean.shape != (dim,) or cov.shape != (dim * dim,):
        raise CliError(f"model file arrays do not match dim={dim}")
    model = from_moments(mean, cov.reshape(dim, dim), rank_tol=rank_tol, divisor=divisor)
    if model.rank != rank:
        raise CliError(f"model file rank {rank} disagrees with its covariance (rank {model.rank})")
    return model


def load_model(path) -> MomentModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    return model_from_json(text)


def cmd_fit(args) -> int:
    data = read_csv(args.csv)
    model = fit_moments(data, divisor=args.divisor, rank_tol=args.rank_tol)
    text = model_to_json(model)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_score(args) -> int:
    model = load_model(args.model)
    data = read_csv(args.csv)
    if data.shape[1] != model.dim:
        raise CliError(f"data has {data.shape[1]} columns, model has dimension {model.dim}")
    w = make_whitener(model)
    z = mahalanobis_sq(w, data)

    out = sys.stdout
    if args.eps is None:
        out.write("index,z\n")
        for i, v in enumerate(z):
            out.write(f"{i},{_machine(v)}\n")
        return EXIT_OK

    inside = z < args.eps
    out.write("index,z,inside\n")
    for i, (v, flag) in enumerate(zip(z, inside)):
        out.write(f"{i},{_machine(v)},{int(flag)}\n")
    k = int(np.count_nonzero(inside))
    out.write(
        f"# inside={k} total={len(z)} coverage={_machine(k / len(z))} "
        f"rank={w.rank} eps={_machine(args.eps)} bound={_machine(chebyshev_coverage_bound(w.rank, args.eps))}\n"
    )
    return EXIT_OK


def cmd_bound(args) -> int:
    n = args.dim
    if args.rank is not None and args.cond is not None:
        raise CliError("--rank and --cond are mutually exclusive")
    if args.rank is not None:
        if not 1 <= args.rank <= n:
            raise CliError(f"--rank must be in [1, {n}]")
        r, kind = args.rank, "rank-deficient"
    elif args.cond is not None:
        if not 1 <= args.cond < n:
            raise CliError(f"--cond must be in [1, {n - 1}]")
        r, kind = n - args.cond, "conditional"
    else:
        r, kind = n, "full-rank"

    result = {
        "dim": n,
        "case": kind,
        "effective_dim": r,
        "eps": args.eps,
        "tail_bound": markov_tail_bound(r, args.eps),
        "coverage_bound": chebyshev_coverage_bound(r, args.eps),
    }
    if args.gaussian:
        result["gaussian_exact"] = gaussian_exact_coverage(r, args.eps)

    if args.json:
        sys.stdout.write(json.dumps(result, indent=2) + "\n")
    else:
        for key, value in result.items():
            shown = value if isinstance(value, str) else _human(value)
            sys.stdout.write(f"{key:<16}{shown}\n")
    return EXIT_OK


VERIFY_COLUMNS = ("dim", "rank", "eps", "chebyshev_lower", "empirical_coverage", "gaussian_exact", "slack")


def cmd_verify(args) -> int:
    spec = default_spec(args.family, args.dim, nu=args.nu, half_width=args.half_width)
    report = verify_bound(
        spec,
        args.eps,
        args.samples,
        args.seed,
        moments_mode=args.moments,
        rank_tol=args.rank_tol,
        workers=args.workers,
    )
    if args.json:
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        out = sys.stdout
        out.write(f"family={report.family} dim={report.dim} moments={report.moments_mode} "
                  f"samples={report.sample_count} seed={report.seed}\n")
        out.write("  ".join(f"{c:>18}" for c in VERIFY_COLUMNS) + "  status\n")
        for row in report.rows:
            cells = [_human(getattr(row, c)) for c in VERIFY_COLUMNS]
            out.write("  ".join(f"{c:>18}" for c in cells) + ("  VIOLATED\n" if row.violated else "  ok\n"))
    return EXIT_VIOLATION if report.violations else EXIT_OK


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0.0) or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _eps_list(text: str) -> list[float]:
    values = [_positive_float(t.strip()) for t in text.split(",") if t.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected at least one eps value")
    return values


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return v


def _rank_tol(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v >= 0.0) or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be finite and >= 0: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvcheb", description="Distribution-free Mahalanobis coverage bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit mean and covariance to a CSV of observations")
    p.add_argument("csv")
    p.add_argument("--divisor", choices=DIVISOR_MODES, default="population")
    p.add_argument("--rank-tol", type=_rank_tol, default=DEFAULT_RANK_TOL)
    p.add_argument("--out", help="write the model here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="squared Mahalanobis distance of each CSV row under a model")
    p.add_argument("model")
    p.add_argument("csv")
    p.add_argument("--eps", type=_positive_float, help="also report strict membership Z < eps")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bound", help="print the Chebyshev tail and coverage bounds")
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--eps", type=_positive_float, required=True)
    p.add_argument("--rank", type=_positive_int, help="covariance rank r < dim (singular case)")
    p.add_argument("--cond", type=_positive_int, help="number of conditioned coordinates k")
    p.add_argument("--gaussian", action="store_true", help="also print the exact chi-squared coverage")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="Monte Carlo check of the coverage bound")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--eps", type=_eps_list, required=True, help="comma-separated list")
    p.add_argument("--moments", choices=MOMENTS_MODES, default="true")
    p.add_argument("--nu", type=float, default=5.0, help="student_t degrees of freedom (> 2)")
    p.add_argument("--half-width", type=_positive_float, default=math.sqrt(3.0), help="uniform_box half-width")
    p.add_argument("--rank-tol", type=_rank_tol, default=DEFAULT_RANK_TOL)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, MvchebError) as exc:
        print(f"mvcheb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
