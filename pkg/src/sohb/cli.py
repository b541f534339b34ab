"""Command-line entry point: ``sohb coeffs | simulate | validate | replay``.

Every run that writes to a file also writes a manifest (JSON) holding the
fully resolved configuration and the SHA-256 of each output; ``replay``
re-executes from a manifest and verifies the hashes.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration
error (including quadrature non-convergence), 3 internal inconsistency.
"""

import argparse
import contextlib
import datetime as _dt
import hashlib
import json
import os
import sys
from importlib import metadata

import numpy as np

from . import coefficients as coeffs_mod
from . import pdmp, suites
from ._parallel import n_threads
from .exceptions import DegenerateESS, InternalMismatch, NoConvergence

MANIFEST_SCHEMA = "sohb-manifest/1"
SCHEMAS = {
    "coeffs": "sohb-coeffs-csv/1",
    "simulate": pdmp.EVENTS_SCHEMA,
    "validate": suites.REPORT_SCHEMA,
}
ROUTE_ALIASES = {"weyl": "weyl", "moments": "trace_moments", "n3": "closed_form_n3"}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0+unknown"


class UsageError(Exception):
    pass


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def parse_kappas(values, kappa_range=None):
    out = []
    for v in values or []:
        try:
            out.extend(float(x) for x in str(v).split(",") if x.strip())
        except ValueError:
            raise UsageError(f"bad kappa value {v!r}") from None
    if kappa_range:
        try:
            start, stop, step = (float(x) for x in kappa_range.split(":"))
        except ValueError:
            raise UsageError(f"--kappa-range must be START:STOP:STEP, got {kappa_range!r}") from None
        if step <= 0 or stop < start:
            raise UsageError("--kappa-range needs STEP > 0 and STOP >= START")
        m = int(np.floor((stop - start) / step + 1e-9))
        out.extend(round(start + i * step, 12) for i in range(m + 1))
    if not out:
        raise UsageError("no kappa values given")
    if any(k < 0 for k in out):
        raise UsageError("kappa must be >= 0")
    return out


# -- commands on resolved configurations ------------------------------------

def run_coeffs(cfg, fh):
    routes = list(coeffs_mod.ROUTES) if cfg["route"] == "all" else [ROUTE_ALIASES[cfg["route"]]]
    tables, disc = [], {}
    for n in cfg["n"]:
        for kappa in cfg["kappa"]:
            rs = [r for r in routes if r != "closed_form_n3" or n == 3]
            if not rs:
                raise UsageError("route n3 exists only for n = 3")
            ts = [coeffs_mod.coefficients(n, kappa, r) for r in rs]
            tables.extend(ts)
            disc[(n, kappa)] = max((coeffs_mod.table_discrepancy(a, b) for a in ts for b in ts), default=0.0)
    coeffs_mod.write_csv(tables, fh, disc if cfg["route"] == "all" else None)
    worst = max(disc.values())
    if cfg["route"] == "all" and worst > coeffs_mod.MISMATCH_RTOL:
        raise InternalMismatch(f"inter-route discrepancy {worst:.3g} above {coeffs_mod.MISMATCH_RTOL:g}")
    return EXIT_OK


def run_simulate(cfg, fh):
    params = pdmp.SimParams.from_dict(cfg["params"])

    def emit(rec):
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    res = pdmp.run(params, emit=emit, emit_events=cfg.get("events", True))
    print(f"events={res.n_events} warnings={res.n_warnings} "
          f"order_parameter={res.snapshots[-1]['order_parameter']:.6f}", file=sys.stderr)
    return EXIT_OK


def run_validate(cfg, fh):
    names = suites.SUITES if cfg["suite"] == "all" else (cfg["suite"],)
    ok = True
    for name in names:
        for n in cfg["n"]:
            checks = suites.run_suite(name, n, cfg["kappa"], cfg.get("N"), cfg["seed"], cfg["grid"])
            suites.write_report(checks, fh)
            ok &= all(c.passed for c in checks)
    return EXIT_OK if ok else EXIT_FAIL


RUNNERS = {"coeffs": run_coeffs, "simulate": run_simulate, "validate": run_validate}


def execute(subcommand, cfg, out_path, manifest_path=None):
    """Run a resolved configuration, write its output and manifest."""
    started = _now()
    code = EXIT_OK
    try:
        with _output(out_path) as fh:
            code = RUNNERS[subcommand](cfg, fh)
    finally:
        if manifest_path is None and out_path not in (None, "-"):
            manifest_path = out_path + ".manifest.json"
        if manifest_path is not None:
            outputs = []
            if out_path not in (None, "-") and os.path.exists(out_path):
                outputs.append({"path": os.path.abspath(out_path), "sha256": _sha256(out_path),
                                "schema": SCHEMAS[subcommand]})
            manifest = {
                "schema": MANIFEST_SCHEMA,
                "subcommand": subcommand,
                "config": cfg,
                "seed": cfg.get("seed", cfg.get("params", {}).get("seed")),
                "tool_version": tool_version(),
                "threads": n_threads(),
                "started": started,
                "finished": _now(),
                "outputs": outputs,
            }
            with open(manifest_path, "w") as mf:
                json.dump(manifest, mf, indent=2, sort_keys=True)
                mf.write("\n")
    return code


def replay(manifest_path, out_dir=None):
    """Re-run a manifest; returns an exit code (1 if any output hash differs)."""
    with open(manifest_path) as fh:
        man = json.load(fh)
    if man.get("schema") != MANIFEST_SCHEMA:
        raise UsageError(f"{manifest_path} is not a run manifest")
    outs = man["outputs"]
    if not outs:
        raise UsageError("manifest records no output file to reproduce")
    target = outs[0]["path"]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        target = os.path.join(out_dir, os.path.basename(target))
    code = execute(man["subcommand"], man["config"], target, target + ".replay.json")
    same = _sha256(target) == outs[0]["sha256"]
    print(f"{'identical' if same else 'DIFFERENT'}: {target}", file=sys.stderr)
    return code if same else EXIT_FAIL


# -- argument parsing --------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="sohb", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", help="coefficient tables as CSV")
    c.add_argument("--n", type=int, nargs="+", required=True)
    c.add_argument("--kappa", nargs="+", help="values, space- or comma-separated")
    c.add_argument("--kappa-range", metavar="START:STOP:STEP")
    c.add_argument("--route", choices=["weyl", "moments", "n3", "all"], default="weyl")
    c.add_argument("--out", help="CSV path (default stdout)")
    c.add_argument("--manifest")

    s = sub.add_parser("simulate", help="particle simulation as NDJSON")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--t-end", type=float)
    s.add_argument("--snapshot-every", type=float)
    s.add_argument("--no-events", action="store_true", help="emit only snapshots and warnings")
    s.add_argument("--out")
    s.add_argument("--manifest")

    v = sub.add_parser("validate", help="validation suites as NDJSON")
    v.add_argument("suite", choices=list(suites.SUITES) + ["all"])
    v.add_argument("--n", type=int, nargs="+", default=[3])
    v.add_argument("--kappa", nargs="+", default=None)
    v.add_argument("--N", type=int, help="Monte Carlo samples (default depends on n)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--grid", type=int, default=24)
    v.add_argument("--out")
    v.add_argument("--manifest")

    r = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--out-dir")
    return p


def _resolve(args):
    if args.command == "coeffs":
        if any(n < 3 for n in args.n):
            raise UsageError("--n must be >= 3")
        return {"n": args.n, "kappa": parse_kappas(args.kappa, args.kappa_range), "route": args.route}
    if args.command == "simulate":
        params = pdmp.load_config(args.config, seed=args.seed, T_end=args.t_end,
                                  snapshot_every=args.snapshot_every)
        return {"params": params.to_dict(), "events": not args.no_events, "seed": params.seed}
    if args.command == "validate":
        if any(n < 3 for n in args.n):
            raise UsageError("--n must be >= 3")
        default = [2.0] if args.suite in ("moments", "fields") else [1.0]
        kappas = parse_kappas(args.kappa) if args.kappa else default
        return {"suite": args.suite, "n": args.n, "kappa": kappas, "N": args.N,
                "seed": args.seed, "grid": args.grid}
    raise AssertionError(args.command)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return replay(args.manifest, args.out_dir)
        cfg = _resolve(args)
        return execute(args.command, cfg, args.out, args.manifest)
    except (UsageError, pdmp.ConfigError, NoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalMismatch as exc:
        print(f"internal mismatch: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except DegenerateESS as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
