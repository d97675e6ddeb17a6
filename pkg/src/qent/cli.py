"""Command-line front end.

Every subcommand writes one document to stdout: JSON carrying
``"schema": "qent/1"``, the resolved configuration and a timestamp, or CSV
with the same header information in ``#`` comment lines. Progress goes to
stderr.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
failure (a diagnostic JSON document is still written to stdout).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys

import numpy as np

SCHEMA = "qent/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_SEED = 0
DEFAULT_TOL_INTEGRALS = 1e-6
DEFAULT_TOL_ORACLE = 1e-8
ORACLE_ABS_FLOOR = 1e-4  # below this magnitude the oracle check is absolute
ORACLE_ABS_TOL = 1e-10


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ output


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _document(command: str, config: dict, result) -> dict:
    return {"schema": SCHEMA, "command": command, "config": _clean(config),
            "result": _clean(result), "timestamp": _timestamp()}


def _write_json(doc, out) -> None:
    json.dump(doc, out, indent=2, allow_nan=False)
    out.write("\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return format(v, ".17g") if math.isfinite(v) else "nan"


def _write_csv(command, config, header, rows, out) -> None:
    out.write(f"# schema={SCHEMA}\n")
    out.write(f"# command={command}\n")
    out.write(f"# config={json.dumps(_clean(config), sort_keys=True)}\n")
    out.write(f"# timestamp={_timestamp()}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(r if isinstance(r, str) else _fmt(r) for r in row) + "\n")


def _progress(label: str, enabled: bool):
    if not enabled:
        return None

    def report(done, total):
        sys.stderr.write(f"{label}: {done}/{total}\n")
        sys.stderr.flush()

    return report


# ------------------------------------------------------------ subcommands


def _cmd_cumulants(args, out):
    from .cumulants import hs_coefficients, hs_cumulants

    k = hs_cumulants(args.m, args.n, precise=args.precise)
    coeffs = hs_coefficients(args.m, args.n)
    degenerate = args.m == 1
    skew = None if degenerate else k.skewness
    kurt = None if degenerate else k.kurtosis
    config = {"m": args.m, "n": args.n, "format": args.format, "precise": args.precise}
    if args.format == "csv":
        rows = [(name, v) for name, v in k.as_dict().items()]
        rows += [("skewness", skew), ("kurtosis", kurt)]
        rows += [(name, v) for name, v in coeffs.as_dict().items()]
        _write_csv("cumulants", config, ("quantity", "value"), rows, out)
    else:
        _write_json(_document("cumulants", config, {
            "cumulants": k.as_dict(), "coefficients": coeffs.as_dict(),
            "skewness": skew, "kurtosis": kurt, "degenerate": degenerate}), out)
    return EXIT_OK


def _cmd_mc(args, out):
    from .cumulants import hs_cumulants, induced_cumulants
    from .ensemble import default_threads, monte_carlo

    threads = args.threads or default_threads()
    res = monte_carlo(args.m, args.n, args.samples, seed=args.seed, streams=args.streams,
                      threads=threads, backend=args.backend,
                      progress=_progress("mc streams", not args.quiet))
    exact_s = hs_cumulants(args.m, args.n).as_tuple()
    exact_t = induced_cumulants(args.m, args.n)

    def block(ks, exact):
        rows = []
        for i, (v, se, ex) in enumerate(zip(ks.values, ks.stderr, exact), start=1):
            d = float(v) - float(ex)
            z = d / se if se > 0 else (0.0 if d == 0 else math.inf)
            rows.append({"order": i, "estimate": v, "stderr": se, "exact": ex,
                         "delta": d, "z": z})
        return {"count": ks.count, "batches": ks.batches, "k": rows,
                "max_abs_z": max(abs(r["z"]) for r in rows)}

    config = {"m": args.m, "n": args.n, "samples": args.samples, "seed": args.seed,
              "threads": threads, "streams": args.streams, "backend": res.backend}
    _write_json(_document("mc", config, {"S": block(res.cumulants(), exact_s),
                                         "T": block(res.induced(), exact_t)}), out)
    return EXIT_OK


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"--grid must be LO:HI:STEP, got {text!r}") from None
    if not (hi > lo and step > 0):
        raise UsageError("--grid needs HI > LO and STEP > 0")
    count = int(round((hi - lo) / step))
    if count < 1 or count > 10**6:
        raise UsageError("--grid yields an unreasonable number of bins")
    return lo + step * np.arange(count + 1)


def _cmd_density(args, out):
    from .cumulants import hs_cumulants
    from .density import ORDERS, DensityApprox, HistogramSink, bin_average
    from .ensemble import default_threads, monte_carlo

    orders = [o.strip() for o in args.order.split(",") if o.strip()]
    bad = [o for o in orders if o not in ORDERS]
    if bad or not orders:
        raise UsageError(f"--order takes a comma list from {ORDERS}, got {args.order!r}")
    edges = _parse_grid(args.grid)
    k = hs_cumulants(args.m, args.n)
    threads = args.threads or default_threads()
    res = monte_carlo(args.m, args.n, args.samples, seed=args.seed, streams=args.streams,
                      threads=threads, sink_factory=lambda: HistogramSink(k, edges),
                      progress=_progress("density streams", not args.quiet))
    hist = res.extra[0].hist
    for s in res.extra[1:]:
        hist = hist.merge(s.hist)
    cols = [hist.centers, hist.density()]
    cols += [bin_average(DensityApprox(o, k).pdf, edges) for o in orders]
    config = {"m": args.m, "n": args.n, "samples": args.samples, "seed": args.seed,
              "grid": args.grid, "order": orders, "threads": threads, "streams": args.streams,
              "outside": hist.outside}
    _write_csv("density", config, ["x", "empirical", *orders], zip(*cols), out)
    return EXIT_OK


def _cmd_verify_identities(args, out):
    from . import identities as ident
    from .ensemble import default_threads

    if args.dump:
        with open(args.dump, "w") as fh:
            json.dump(ident.catalog_document(args.catalog), fh, indent=1)
            fh.write("\n")
    threads = args.threads or default_threads()
    reports = ident.verify_catalog(args.suite, tolerance=args.tol, threads=threads,
                                   path=args.catalog)
    failed = [r.id for r in reports if not r.passed]
    config = {"suite": args.suite, "tol": args.tol, "threads": threads,
              "catalog": args.catalog or "builtin", "dump": args.dump}
    _write_json(_document("verify identities", config, {
        "checked": len(reports), "failed": failed, "passed": not failed,
        "reports": [r.as_dict() for r in reports]}), out)
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_verify_integrals(args, out):
    from .cumulants import induced_cumulants
    from .kernel import integrals_IA_to_ID

    I = integrals_IA_to_ID((args.m, args.n))
    via = I["IA"] - 3.0 * I["IB1"] - 4.0 * I["IB2"] + 12.0 * I["IC"] - 6.0 * I["ID"]
    closed = induced_cumulants(args.m, args.n)[3]
    rel = abs(via - closed) / abs(closed) if closed else abs(via)
    ok = rel <= args.tol
    config = {"m": args.m, "n": args.n, "tol": args.tol}
    _write_json(_document("verify integrals", config, {
        "integrals": I, "k4T_integrals": via, "k4T_closed_form": closed,
        "rel_error": rel, "passed": ok}), out)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_verify_oracle(args, out):
    from .cumulants import hs_cumulants
    from .ensemble import m2_oracle_cumulants, m2_oracle_normalization

    oracle = m2_oracle_cumulants(args.n).as_tuple()
    closed = hs_cumulants(2, args.n).as_tuple()
    rows, ok = [], True
    for i, (o, c) in enumerate(zip(oracle, closed), start=1):
        if abs(c) < ORACLE_ABS_FLOOR:
            err, kind, tol = abs(o - c), "absolute", ORACLE_ABS_TOL
        else:
            err, kind, tol = abs(o - c) / abs(c), "relative", args.tol
        rows.append({"order": i, "oracle": o, "closed_form": c, "error": err,
                     "error_kind": kind, "tolerance": tol, "passed": err <= tol})
        ok &= err <= tol
    config = {"m": 2, "n": args.n, "tol": args.tol}
    _write_json(_document("verify oracle", config, {
        "normalization": m2_oracle_normalization(args.n), "k": rows, "passed": ok}), out)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_kurtosis_scan(args, out):
    from .cumulants import hs_cumulants

    rows = []
    for m in args.sizes:
        k = hs_cumulants(m, m)
        rows.append({"m": m, "n": m, "k2": k.k2, "k4": k.k4,
                     "skewness": k.skewness, "kurtosis": k.kurtosis})
    mags = [abs(r["kurtosis"]) for r in rows]
    decreasing = all(b < a for a, b in zip(mags, mags[1:]))
    _write_json(_document("kurtosis-scan", {"sizes": args.sizes},
                          {"scan": rows, "strictly_decreasing": decreasing}), out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _size_list(text):
    try:
        sizes = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return sizes


def _dims(p):
    p.add_argument("--m", type=_positive_int, required=True, help="smaller dimension")
    p.add_argument("--n", type=_positive_int, required=True, help="larger dimension, n >= m")


def _sampling(p, default_samples):
    p.add_argument("--samples", type=_positive_int, default=default_samples)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: QENT_THREADS or all cores)")
    p.add_argument("--streams", type=_positive_int, default=64,
                   help="independent RNG streams; also the batch count for standard errors")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qent", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cumulants", help="exact cumulants, coefficients, skewness, kurtosis")
    _dims(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--precise", action="store_true", help="evaluate in 40-digit arithmetic")
    p.set_defaults(func=_cmd_cumulants)

    p = sub.add_parser("mc", help="Monte Carlo k-statistics against the exact cumulants")
    _dims(p)
    _sampling(p, 100_000)
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("density", help="empirical vs Gram-Charlier densities as CSV")
    _dims(p)
    _sampling(p, 1_000_000)
    p.add_argument("--grid", default="-8:8:0.05", help="histogram edges LO:HI:STEP")
    p.add_argument("--order", default="gaussian,k3,k4",
                   help="comma list of model columns from gaussian, k3, k4")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("kurtosis-scan", help="kurtosis along m = n")
    p.add_argument("--sizes", type=_size_list, default=[5, 10, 20, 40, 80])
    p.set_defaults(func=_cmd_kurtosis_scan)

    v = sub.add_parser("verify", help="numerical verification suites")
    vs = v.add_subparsers(dest="target", required=True)

    p = vs.add_parser("identities", help="check the summation-identity catalog")
    p.add_argument("--suite", choices=("A", "B", "all"), default="all")
    p.add_argument("--tol", type=_positive_float, default=None,
                   help="override the per-family tolerance (1e-10 first type, 1e-9 second)")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--catalog", default=None, help="verify this catalog file instead")
    p.add_argument("--dump", default=None, help="also write the catalog JSON to this path")
    p.set_defaults(func=_cmd_verify_identities)

    p = vs.add_parser("integrals", help="k4 of T through kernel integrals vs closed form")
    _dims(p)
    p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL_INTEGRALS)
    p.set_defaults(func=_cmd_verify_integrals)

    p = vs.add_parser("oracle", help="m = 2 quadrature vs closed-form cumulants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL_ORACLE)
    p.set_defaults(func=_cmd_verify_oracle)
    return ap


def main(argv=None, out=None) -> int:
    from .cumulants import DegenerateDistributionError
    from .ensemble import NumericalFailure

    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    if getattr(args, "m", None) is not None and getattr(args, "n", None) is not None \
            and args.m > args.n:
        sys.stderr.write(f"qent: error: need m <= n, got m = {args.m}, n = {args.n}\n")
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"qent: error: {exc}\n")
        return EXIT_USAGE
    except NumericalFailure as exc:
        _write_json(_document(args.command, _vars_config(args),
                              {"failure": exc.diagnostic}), out)
        return EXIT_NUMERIC
    except (ArithmeticError, DegenerateDistributionError) as exc:
        _write_json(_document(args.command, _vars_config(args),
                              {"failure": {"error": str(exc), "type": type(exc).__name__}}), out)
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write(f"qent: error: {exc}\n")
        return EXIT_USAGE


def _vars_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


if __name__ == "__main__":
    sys.exit(main())
