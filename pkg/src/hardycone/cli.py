"""Command-line interface: ``hardycone {profile,bound,estimate,verify,sweep}``.

Exit codes: 0 success, 1 invalid flags, 2 solver failure, 3 non-convergence.
Records are line-delimited JSON (``--format csv`` for tables).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bounds, cone_profile, estimator, geometry, verifier
from .errors import HardyError
from .params import ProblemParams

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


@contextlib.contextmanager
def _open_out(path: str):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _clean(x):
    # JSON-safe floats: NaN/inf become null
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dumps(record: dict) -> str:
    return json.dumps(_clean(record), sort_keys=True)


def _flatten(record: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in record.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(_clean(v))
        else:
            out[key] = v
    return out


def _emit(records, fh, fmt: str) -> None:
    records = list(records)
    if fmt == "json":
        for r in records:
            fh.write(_dumps(r) + "\n")
        return
    flat = [_flatten(_clean(r)) for r in records]
    keys = sorted({k for r in flat for k in r})
    w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow(r)


def _params(args, alpha: float = 0.0) -> ProblemParams:
    try:
        return ProblemParams(args.N, args.p, alpha, args.tol)
    except (TypeError, ValueError) as exc:
        raise _UsageError(str(exc)) from exc


def _domain(args) -> geometry.DomainSpec:
    try:
        if getattr(args, "domain_config", None):
            with open(args.domain_config) as fh:
                return geometry.load_domain(fh)
        if args.domain is None:
            raise _UsageError("--domain or --domain-config is required")
        params = {}
        if args.domain == "sector":
            params = {"beta": args.sector_beta, "radius": args.sector_radius}
        return geometry.DomainSpec(args.domain, params)
    except (OSError, ValueError, KeyError) as exc:
        raise _UsageError(str(exc)) from exc


# -- commands -----------------------------------------------------------------------

GAMMA_SNAP = 1e-4


def _snap_gamma(gamma: float | None) -> float | None:
    # flags are typed with a few decimals; 3.1416 means pi
    if gamma is not None and math.pi < gamma <= math.pi + GAMMA_SNAP:
        return math.pi
    return gamma


def cmd_profile(args) -> int:
    params = _params(args)
    prof = cone_profile.solve_lambda(_snap_gamma(args.gamma), params, n_samples=args.samples)
    if args.format == "json":
        rec = {"gamma": prof.gamma, "N": prof.N, "p": prof.p, "lambda": prof.lam,
               "residual": prof.residual, "provenance": "cone-profile"}
        with _open_out(args.out) as fh:
            _emit([rec], fh, "json")
    else:
        with _open_out(args.out) as fh:
            prof.to_csv(fh)
    return EXIT_OK


def bound_records(beta: float, N: int, p: float, alpha: float, tol: float = 1e-9,
                  gamma: float | None = None, flags: bounds.DomainFlags | None = None) -> list:
    params = ProblemParams(N, p, alpha, tol)
    rows = []
    if gamma is None:
        rows.append(bounds.best_cone_bound(beta, params))
    else:
        rows.append(bounds.mu_cone(beta, cone_profile.solve_lambda(gamma, params), params))
    if p + 1.0 > N and (gamma is None or gamma < math.pi):
        rows.append(bounds.mu_cone(beta, cone_profile.solve_lambda(math.pi, params), params))
    if flags is None:
        flags = bounds.DomainFlags(exterior_cone_beta=beta)
    rows.extend(bounds.known_bounds(params, flags))
    return [r.to_dict() for r in rows]


def cmd_bound(args) -> int:
    _params(args, args.alpha)
    flags = None
    if args.domain is not None or args.domain_config:
        dom = _domain(args)
        flags = dom.flags
        if flags.exterior_cone_beta is None:
            flags = bounds.DomainFlags(flags.convex, flags.simply_connected_2d,
                                       flags.mean_convex, args.beta)
    if not 0.0 < args.beta < math.pi:
        raise _UsageError("--beta must lie in (0, pi)")
    recs = bound_records(args.beta, args.N, args.p, args.alpha, args.tol,
                         _snap_gamma(args.gamma), flags)
    with _open_out(args.out) as fh:
        _emit(recs, fh, args.format)
    return EXIT_OK


def estimate_record(domain: geometry.DomainSpec, alpha: float, p: float, h: float,
                    max_iter: int, tol: float, seed: int, minimizer_csv: str | None = None):
    grid = geometry.build_grid(domain, h)
    est = estimator.minimize(grid, alpha, p, max_iter=max_iter, tol=tol, seed=seed)
    if minimizer_csv:
        with open(minimizer_csv, "w") as fh:
            est.minimizer.to_csv(fh)
    rec = est.to_dict()
    rec["residual"] = est.residual
    rec["provenance"] = "rayleigh-quotient-estimate"
    return rec, est.converged


def cmd_estimate(args) -> int:
    dom = _domain(args)
    if not args.h > 0.0:
        raise _UsageError("--h must be positive")
    rec, conv = estimate_record(dom, args.alpha, args.p, args.h, args.max_iter, args.tol,
                                args.seed, args.minimizer_csv)
    with _open_out(args.out) as fh:
        _emit([rec], fh, args.format)
    return EXIT_OK if conv else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    kind = args.kind
    if kind == "appendix":
        rec = verifier.appendix_property(args.samples, args.seed)
        rec["provenance"] = "scalar-inequality"
        rec["passed"] = rec["violations"] == 0
    elif kind == "mincon":
        dom = _domain(args)
        beta = dom.metadata.exterior_cone_beta
        gamma = _snap_gamma(args.gamma)
        if beta is None or not beta < gamma <= math.pi:
            raise _UsageError("--gamma must exceed the domain's exterior cone angle")
        params = ProblemParams(2, args.p, 0.0, args.tol)
        prof = cone_profile.solve_lambda(gamma, params)
        grid = geometry.build_grid(dom, args.h)
        _, rep = verifier.min_construction(grid, dom, gamma, prof, args.n_cones, args.epsilon)
        rec = rep.to_dict()
        rec.update(domain=dom.to_config(), h=args.h, p=args.p, provenance="min-construction")
    elif kind == "supersolution":
        dom = _domain(args)
        grid = geometry.build_grid(dom, args.h)
        nu = args.nu if args.nu is not None else (args.p - 1.0) / args.p + 1e-3
        rep = verifier.agmon_supersolution(grid, args.alpha, args.p, nu, args.eta, args.mu)
        rec = rep.to_dict()
        rec.update(domain=dom.to_config(), h=args.h, alpha=args.alpha, p=args.p,
                   provenance="agmon-supersolution")
    elif kind == "projection":
        dom = _domain(args)
        if args.x is None:
            raise _UsageError("--x X Y is required for --kind projection")
        rep = verifier.check_projection_window(dom, args.x, args.epsilon, args.samples,
                                               args.seed, require_margin=not args.no_margin)
        rec = rep.to_dict()
        rec.update(domain=dom.to_config(), x=list(args.x), provenance="projection-window")
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown kind {kind}")
    with _open_out(args.out) as fh:
        _emit([rec], fh, args.format)
    return EXIT_OK


def _sweep_job(job: dict) -> dict:
    kind = job["kind"]
    try:
        if kind == "lambda":
            params = ProblemParams(job["N"], job["p"], 0.0, job["tol"])
            lam = cone_profile.cone_exponent(job["gamma"], params)
            return {**job, "lambda": lam, "provenance": "cone-profile"}
        if kind == "bound":
            recs = bound_records(job["beta"], job["N"], job["p"], job["alpha"], job["tol"])
            return {**job, "rows": recs}
        if kind == "estimate":
            dom = geometry.DomainSpec(job["domain"])
            rec, conv = estimate_record(dom, job["alpha"], job["p"], job["h"],
                                        job["max_iter"], job["tol"], job["seed"])
            return {**job, **rec}
    except HardyError as exc:
        return {**job, "error": str(exc)}
    raise ValueError(f"unknown sweep kind {kind}")


def _threads() -> int:
    env = os.environ.get("HARDY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise _UsageError("HARDY_THREADS must be a positive integer") from None
    return os.cpu_count() or 1


def sweep_jobs(args) -> list[dict]:
    tol = args.tol
    if args.kind == "lambda":
        gammas = [_snap_gamma(g) for g in args.gamma or [math.pi / 2]]
        grid = itertools.product(args.N, args.p, gammas)
        return [{"kind": "lambda", "N": N, "p": p, "gamma": g, "tol": tol} for N, p, g in grid]
    if args.kind == "bound":
        grid = itertools.product(args.N, args.p, args.alpha, args.beta or [math.pi / 2])
        return [{"kind": "bound", "N": N, "p": p, "alpha": a, "beta": b, "tol": tol}
                for N, p, a, b in grid]
    grid = itertools.product(args.domain or ["unit_square"], args.p, args.alpha, args.h)
    return [{"kind": "estimate", "domain": d, "p": p, "alpha": a, "h": h,
             "max_iter": args.max_iter, "tol": args.est_tol, "seed": args.seed}
            for d, p, a, h in grid]


def cmd_sweep(args) -> int:
    jobs = sweep_jobs(args)
    workers = min(_threads(), len(jobs)) or 1
    status = EXIT_OK
    with _open_out(args.out) as fh:
        if workers == 1:
            results = map(_sweep_job, jobs)
            ex = None
        else:
            ex = ProcessPoolExecutor(max_workers=workers)
            results = ex.map(_sweep_job, jobs)
        try:
            for rec in results:
                if rec.get("converged") is False:
                    status = EXIT_NOT_CONVERGED
                fh.write(_dumps(rec) + "\n")
                fh.flush()
        finally:
            if ex is not None:
                ex.shutdown()
    return status


# -- parser -------------------------------------------------------------------------

def _add_common(sp, need_np: bool = True) -> None:
    if need_np:
        sp.add_argument("--N", type=int, default=2, help="dimension (default 2)")
        sp.add_argument("--p", type=float, default=2.0, help="exponent p > 1 (default 2)")
    sp.add_argument("--tol", type=float, default=1e-9, help="solver tolerance")
    sp.add_argument("--out", default="-", help="output path (default stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def _add_domain(sp, required: bool = False) -> None:
    sp.add_argument("--domain", choices=geometry.SHAPES, default=None)
    sp.add_argument("--domain-config", default=None, help="JSON file {shape, params}")
    sp.add_argument("--sector-beta", type=float, default=math.pi / 4)
    sp.add_argument("--sector-radius", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hardycone", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="solve the cone eigenvalue problem")
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--samples", type=int, default=cone_profile.N_SAMPLES)
    _add_common(sp)
    sp.set_defaults(func=cmd_profile, format="csv")

    sp = sub.add_parser("bound", help="tabulate lower bounds")
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=None,
                    help="fixed cone aperture (default: optimize over gamma)")
    _add_common(sp)
    _add_domain(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("estimate", help="minimize the discrete Rayleigh quotient")
    _add_domain(sp)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--h", type=float, default=1.0 / 64)
    sp.add_argument("--max-iter", type=int, default=5000)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--minimizer-csv", default=None)
    sp.add_argument("--out", default="-")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("verify", help="check the supersolution constructions")
    sp.add_argument("--kind", required=True,
                    choices=("appendix", "mincon", "supersolution", "projection"))
    _add_domain(sp)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gamma", type=float, default=3 * math.pi / 4)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--n-cones", type=int, default=64)
    sp.add_argument("--h", type=float, default=1.0 / 128)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--nu", type=float, default=None)
    sp.add_argument("--eta", type=float, default=0.9)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--x", type=float, nargs=2, default=None, metavar=("X", "Y"))
    sp.add_argument("--no-margin", action="store_true",
                    help="allow points closer to the boundary than epsilon")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", default="-")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="run a Cartesian parameter grid in parallel")
    sp.add_argument("--kind", choices=("lambda", "bound", "estimate"), default="bound")
    sp.add_argument("--N", type=int, nargs="+", default=[2])
    sp.add_argument("--p", type=float, nargs="+", default=[2.0])
    sp.add_argument("--alpha", type=float, nargs="+", default=[0.0])
    sp.add_argument("--beta", type=float, nargs="+", default=None)
    sp.add_argument("--gamma", type=float, nargs="+", default=None)
    sp.add_argument("--domain", choices=geometry.SHAPES, nargs="+", default=None)
    sp.add_argument("--h", type=float, nargs="+", default=[1.0 / 32])
    sp.add_argument("--max-iter", type=int, default=5000)
    sp.add_argument("--est-tol", type=float, default=1e-10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on usage errors and --help; report the code instead
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hardycone: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HardyError as exc:
        print(f"hardycone: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
