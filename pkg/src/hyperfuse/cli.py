"""Command-line front end: ``hyperfuse {fuse,sweep,homodyne,verify}``.

Every error path prints one line ``hyperfuse: error: <kind>: <reason>`` on
standard error.  Usage errors exit 2; failed checks and I/O errors exit 1.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from typing import IO, Iterator, Sequence

import numpy as np

from . import tables
from .acceptance import CRITERION_KEYS, run_suite
from .fusion_protocol import FID_TOL, ProtocolConfig, class_totals, run_fusion
from .kerr_probe import HomodyneModel, curve_rows, homodyne_success_prob, peak_center, success_rows
from .optics import BsParams, PbsParams
from .surfaces import QUANTITIES, SweepSpec, fmt, parse_range, sweep_rows, write_csv

DEFAULT_TOL = 1e-12
PROG = "hyperfuse"


class CliError(Exception):
    """Runtime failure reported with exit code 1."""

    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(2, f"{PROG}: error: usage: {message}\n")


def tolerance() -> float:
    """Comparison tolerance, overridable through ``HYPERFUSE_TOL``."""
    raw = os.environ.get("HYPERFUSE_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        value = float(raw)
    except ValueError:
        raise CliError("config", f"HYPERFUSE_TOL is not a number: {raw!r}") from None
    if not value > 0:
        raise CliError("config", "HYPERFUSE_TOL must be positive")
    return value


@contextlib.contextmanager
def _output(path: str | None) -> Iterator[IO[str]]:
    """Open ``path`` for UTF-8 text output, or yield stdout for None/"-"."""
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise CliError("io", f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


# fuse -------------------------------------------------------------------------


def _config(args: argparse.Namespace) -> ProtocolConfig:
    three = args.scheme == 3
    if three and args.t is None:
        raise CliError("usage", "--t is required for --scheme 3")
    if not three and args.t is not None:
        raise CliError("usage", "--t is only valid for --scheme 3")
    if three and (args.rdev or args.thetadev):
        raise CliError("usage", "--rdev/--thetadev apply to the two-fusion PBSs only")
    pbs = PbsParams(args.thetadev, args.rdev) if (args.rdev or args.thetadev) else None
    bs = BsParams(args.eps) if args.eps else None
    homodyne = None
    if args.alpha is not None:
        homodyne = HomodyneModel(args.alpha, args.theta, args.gammat)
    return ProtocolConfig.uniform(args.n, args.m, args.t, pbs=pbs, bs=bs, homodyne=homodyne)


def cmd_fuse(args: argparse.Namespace) -> int:
    try:
        cfg = _config(args)
    except ValueError as exc:
        raise CliError("usage", str(exc)) from None
    ideal = not (cfg.pbs or cfg.bs)
    reports = run_fusion(cfg, strict=ideal)
    tol = tolerance()
    total = math.fsum(r.probability for r in reports)
    if abs(total - 1.0) > tol:
        raise CliError("invariant", f"branch probabilities sum to {total!r}")
    if ideal:
        bad = sorted({str(r.cls) for r in reports if r.fidelity < 1 - FID_TOL})
        if bad:
            raise CliError("invariant", f"fidelity below 1 in classes {','.join(bad)}")

    if args.out:
        with _output(args.out) as fh:
            json.dump([r.to_record() for r in reports], fh, indent=1, sort_keys=True)
            fh.write("\n")

    totals = class_totals(reports)
    rows = []
    for cls, p in totals.items():
        mine = [r for r in reports if r.cls == cls]
        fid = math.fsum(r.probability * r.fidelity**2 for r in mine) / p if p else 0.0
        rows.append((str(cls), f"{p:.4f}", mine[0].target, f"{fid:.4f}"))
    header = ("class", "probability", "label", "fidelity")
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    for row in (header, *rows):
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    print(f"total probability {total:.12g}")
    if cfg.homodyne is not None:
        probes = 3 if cfg.three else 1
        print(f"homodyne success probability {fmt(homodyne_success_prob(cfg.homodyne, probes))}")
    return 0


# sweep -------------------------------------------------------------------------


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        spec = SweepSpec(
            args.quantity,
            parse_range(args.n_range),
            parse_range(args.m_range),
            parse_range(args.t_range) if args.t_range else None,
        )
    except ValueError as exc:
        raise CliError("usage", str(exc)) from None
    rows = sweep_rows(spec)
    with _output(args.out) as fh:
        write_csv(spec.header, rows, fh)
    return 0


# homodyne ------------------------------------------------------------------------


def _alphas(args: argparse.Namespace) -> np.ndarray:
    if args.alpha is not None:
        return np.array([args.alpha])
    lo, hi = (float(x) for x in args.alpha_range.split(".."))
    if hi < lo or lo < 0:
        raise CliError("usage", f"bad --alpha-range {args.alpha_range!r}")
    return np.linspace(lo, hi, args.points)


def cmd_homodyne(args: argparse.Namespace) -> int:
    try:
        alphas = _alphas(args)
        HomodyneModel(float(alphas[0]), args.theta, args.gammat)
        ks = [int(k) for k in args.curves.split(",")] if args.curves else []
    except ValueError as exc:
        raise CliError("usage", str(exc)) from None
    rows = success_rows(alphas, args.theta, args.gammat, args.probes)
    same = args.curves_out in (None, "-") and args.out in (None, "-")
    with _output(args.out) as fh:
        write_csv(["alpha", "p_suc"], rows, fh)
    if ks:
        alpha = float(alphas[-1])
        centers = [peak_center(alpha, k, args.theta) for k in ks]
        xs = np.linspace(min(centers) - 6.0, max(centers) + 6.0, args.samples)
        with _output(args.curves_out) as fh:
            if same:
                fh.write("\r\n")
            write_csv(["x", *(f"k{k}" for k in ks)], curve_rows(alpha, args.theta, ks, xs), fh)
    return 0


# verify ---------------------------------------------------------------------------


def _load_table(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return tables.feedforward_table_from_json(json.load(fh))
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from None
    except (ValueError, AttributeError) as exc:
        raise CliError("io", f"bad feed-forward table {path}: {exc}") from None


def cmd_verify(args: argparse.Namespace) -> int:
    only = None
    if args.only:
        only = [k.strip() for chunk in args.only for k in chunk.split(",") if k.strip()]
        unknown = sorted(set(only) - set(CRITERION_KEYS))
        if unknown:
            raise CliError("usage", f"unknown criteria {unknown}; choose from {list(CRITERION_KEYS)}")
    table = _load_table(args.table) if args.table else None
    results = run_suite(only, table)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"summary: {passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 1


# parser ------------------------------------------------------------------------------


def _size(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError("sizes must be >= 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Hyper-W fusion simulator and analysis tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fuse", help="run a fusion pipeline and summarize its branches")
    f.add_argument("--scheme", type=int, choices=(2, 3), required=True)
    f.add_argument("--n", type=_size, required=True)
    f.add_argument("--m", type=_size, required=True)
    f.add_argument("--t", type=_size)
    f.add_argument("--eps", type=float, default=0.0, help="BS transmission imperfection")
    f.add_argument("--rdev", type=float, default=0.0, help="PBS extinction ratio")
    f.add_argument("--thetadev", type=float, default=0.0, help="PBS mirror deviation (rad)")
    f.add_argument("--alpha", type=float, help="probe amplitude for the homodyne model")
    f.add_argument("--theta", type=float, default=0.01, help="Kerr phase per photon (rad)")
    f.add_argument("--gammat", type=float, default=0.0, help="probe decoherence")
    f.add_argument("--out", help="write the branch reports as JSON")
    f.set_defaults(func=cmd_fuse)

    s = sub.add_parser("sweep", help="closed-form probability surface as CSV")
    s.add_argument("--quantity", choices=QUANTITIES, default="S")
    s.add_argument("--n-range", default="2..10")
    s.add_argument("--m-range", default="2..10")
    s.add_argument("--t-range", help="add a third size axis (three-party fusion)")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_sweep)

    h = sub.add_parser("homodyne", help="homodyne success probability and class curves")
    g = h.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=float)
    g.add_argument("--alpha-range", help="LO..HI, sampled at --points values")
    h.add_argument("--points", type=int, default=100)
    h.add_argument("--theta", type=float, required=True)
    h.add_argument("--gammat", type=float, default=0.0)
    h.add_argument("--probes", type=int, choices=(1, 3), default=1)
    h.add_argument("--curves", help="comma-separated class indices k to sample")
    h.add_argument("--samples", type=int, default=1001, help="points per curve")
    h.add_argument("--out", help="P_suc CSV path (default stdout)")
    h.add_argument("--curves-out", help="curve CSV path (default stdout)")
    h.set_defaults(func=cmd_homodyne)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", action="append", help=f"criteria to run: {', '.join(CRITERION_KEYS)}")
    v.add_argument("--table", help="JSON two-fusion feed-forward table to check instead of the built-in one")
    v.set_defaults(func=cmd_verify)
    return p


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        code = 2 if exc.kind == "usage" else 1
        if code == 2:
            build_parser().print_usage(sys.stderr)
        print(f"{PROG}: error: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return code
    except Exception as exc:  # keep the one-line error contract
        print(f"{PROG}: error: internal: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
