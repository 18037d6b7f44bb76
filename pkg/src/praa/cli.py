"""Command-line interface: ``praa {sample,bound,explore,verify-ring,certify,sharpness}``.

Exit codes: 0 success, 1 a checked property failed, 2 bad configuration,
3 a resource budget was exceeded.  Budgets can be raised through the
environment variables ``PRAA_VERTEX_BUDGET``, ``PRAA_SYMMETRIZE_BUDGET``
and ``PRAA_CERT_BASIS_BUDGET``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import groupring, schreier, walker
from .blackbox import EnumerationError, GroupError, is_generating, load_group, pad_tuple

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3

DEFAULT_CERT_BASIS_BUDGET = 400


class ConfigError(Exception):
    pass


class BudgetError(Exception):
    pass


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None


def _resolved(args: argparse.Namespace, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"version": __version__, "config": cfg, **extra}


def _emit_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _group_tuple(path: str, k: int):
    try:
        handle, gens = load_group(path)
    except OSError as exc:
        raise ConfigError(f"cannot read group file: {exc}") from None
    except (GroupError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad group file: {exc}") from None
    try:
        return handle, pad_tuple(handle, gens, k)
    except GroupError as exc:
        raise ConfigError(str(exc)) from None


# --- sample -----------------------------------------------------------------------


def cmd_sample(args: argparse.Namespace) -> int:
    handle, S0 = _group_tuple(args.group, args.k)
    order = None
    if args.steps == "auto":
        if args.k < 5:
            raise ConfigError("--steps auto needs k >= 5; give an explicit step count")
        try:
            order = handle.order()
        except EnumerationError as exc:
            raise BudgetError(str(exc)) from None
        steps = walker.mixing_bound(args.k, order, args.eps)
    else:
        try:
            steps = int(args.steps)
        except ValueError:
            raise ConfigError(f"--steps must be an integer or 'auto', got {args.steps!r}") from None
        if steps < 0:
            raise ConfigError("--steps must be nonnegative")
    if args.count < 0:
        raise ConfigError("--count must be nonnegative")
    samples = walker.praa_sample_batch(handle, S0, steps, args.seed, args.count,
                                       first_stream=args.first_stream, workers=args.workers)
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "element_encoding_hex"])
    for n, x in enumerate(samples):
        w.writerow([n, handle.encode(x).hex()])
    if args.out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.out).write_text(buf.getvalue())
    if args.meta:
        _emit_json(_resolved(args, resolved_steps=steps, group_order=order), args.meta)
    return EXIT_OK


# --- bound ------------------------------------------------------------------------


def cmd_bound(args: argparse.Namespace) -> int:
    if (args.order is None) == (args.log_order is None):
        raise ConfigError("give exactly one of --order and --log-order")
    try:
        t = walker.mixing_bound(args.k, args.order, args.eps, log_order=args.log_order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.json:
        _emit_json(_resolved(args, steps=t), None)
    else:
        print(t)
    return EXIT_OK


# --- explore ----------------------------------------------------------------------


def _epsilon_at(t: int, k: int, log_order: float) -> float | None:
    """The epsilon for which the mixing bound equals t (capped at 1)."""
    if k < 5:
        return None
    x = t / walker.mixing_prefactor(k) - (k + 1) * log_order
    return 1.0 if x <= 0 else math.exp(-x)


def cmd_explore(args: argparse.Namespace) -> int:
    handle, S0 = _group_tuple(args.group, args.k)
    budget = _env_int("PRAA_VERTEX_BUDGET", args.budget)
    try:
        if not is_generating(handle, S0):
            raise ConfigError("the padded tuple does not generate the group")
        order = handle.order()
        g = schreier.enumerate_component(handle, S0, args.family, budget)
    except (EnumerationError, schreier.ResourceError) as exc:
        raise BudgetError(str(exc)) from None
    result = schreier.spectral_analysis(g)
    summary = {
        "vertex_count": len(g),
        "degree": g.degree,
        "group_order": order,
        "family": args.family,
        "gap": result.gap,
        "eigensolver_residual": result.residual,
        "eigensolver": result.method,
    }
    ok = result.residual <= schreier.RESIDUAL_TOL
    if args.family == schreier.CN and args.k >= 5:
        lb = schreier.gap_lower_bound(args.k)
        summary["gap_lower_bound"] = lb
        summary["bound_satisfied"] = result.gap >= lb
        ok = ok and result.gap >= lb
    else:
        summary["gap_lower_bound"] = None
        summary["bound_satisfied"] = None
    if args.edges:
        with open(args.edges, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "target", "label"])
            for v in range(len(g)):
                for c, lab in enumerate(g.labels):
                    w.writerow([v, int(g.targets[v, c]), str(lab)])
    if args.tv_csv:
        summary["tv_steps"] = _tv_decay(handle, g, args, order)
    _emit_json({**_resolved(args, resolved_budget=budget), "summary": summary}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _tv_decay(handle, g, args, order: int) -> int:
    steps = args.steps
    if steps is None:
        steps = walker.mixing_bound(args.k, order, args.eps) if args.k >= 5 else 200
    every = args.every or max(1, steps // 100)
    n = len(g)
    uni = schreier.uniform(n)
    classes = None
    if args.family == schreier.CN:
        classes = schreier.accumulator_classes(handle, g)
        uni_g, _ = schreier.pushforward(uni, classes)
    log_order = math.log(order)
    rows = []

    def record(s: int, mu: schreier.Distribution) -> None:
        tv_sigma = float(schreier.tv_bounds(mu, uni)[1])
        tv_group = ""
        if classes is not None:
            nu, _ = schreier.pushforward(mu, classes)
            tv_group = float(schreier.tv_bounds(nu, uni_g)[1])
        eps_t = _epsilon_at(s, args.k, log_order)
        rows.append([s, tv_sigma, tv_group, "" if eps_t is None else eps_t])

    schreier.evolve(g, schreier.point_mass(n, 0), steps, every=every, callback=record)
    with open(args.tv_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "tv_sigma", "tv_group", "paper_bound_epsilon_at_t"])
        w.writerows(rows)
    return steps


# --- verify-ring ------------------------------------------------------------------


def cmd_verify_ring(args: argparse.Namespace) -> int:
    if args.k < 2:
        raise ConfigError("--k must be at least 2")
    K = args.k if args.K is None else args.K
    if K < args.k:
        raise ConfigError("--K must be at least --k")
    budget = _env_int("PRAA_SYMMETRIZE_BUDGET", groupring.SYMMETRIZATION_BUDGET)
    if K > budget:
        raise BudgetError(f"K = {K} exceeds the symmetrization budget {budget}")
    checks = {f"decomposition k={args.k}: {n}": ok
              for n, ok in groupring.decomposition_identities(args.k).items()}
    if K > args.k:
        for n, ok in groupring.symmetrization_identities(args.k, K).items():
            checks[f"symmetrization k={args.k} K={K}: S({n})"] = ok
    passed = all(checks.values())
    if args.json:
        _emit_json({**_resolved(args), "checks": checks, "passed": passed}, None)
    else:
        for name, ok in checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        print(f"all identities exact: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# --- certify ----------------------------------------------------------------------


def cmd_certify(args: argparse.Namespace) -> int:
    if (args.cert is None) == (args.toy_group is None):
        raise ConfigError("give exactly one of --cert and --toy-group")
    if args.cert is not None:
        try:
            cert = groupring.load_certificate(args.cert)
        except OSError as exc:
            raise ConfigError(f"cannot read certificate: {exc}") from None
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise ConfigError(f"bad certificate: {exc}") from None
        limit = _env_int("PRAA_CERT_BASIS_BUDGET", DEFAULT_CERT_BASIS_BUDGET)
        if len(cert.basis) > limit and not args.allow_large:
            raise BudgetError(f"certificate basis has {len(cert.basis)} elements, above the budget {limit}; "
                              "pass --allow-large or raise PRAA_CERT_BASIS_BUDGET")
        try:
            res = groupring.certify(cert)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        report = {"target": cert.target, "rank": cert.rank, "basis_size": len(cert.basis)}
    else:
        try:
            handle, gens = load_group(args.toy_group)
        except (OSError, GroupError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad group file: {exc}") from None
        try:
            toy = groupring.ToyGroup(handle, gens)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        optimum = toy.optimal_lambda()
        lambda0 = Fraction(args.lambda0) if args.lambda0 else Fraction(optimum) - Fraction(1, 10**9)
        E, Q = toy.oracle_certificate(lambda0)
        lap = toy.laplacian()
        res = groupring.certify_element(lap * lap, lap, lambda0, Q, E)
        report = {"target": "delta_squared", "group_order": len(E), "spectral_optimum": optimum}
    report.update(res.summary())
    _emit_json({**_resolved(args), "result": report}, args.out)
    return EXIT_OK if res.success else EXIT_FAIL


# --- sharpness --------------------------------------------------------------------


def cmd_sharpness(args: argparse.Namespace) -> int:
    try:
        r = schreier.sharpness_check(args.k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    checks = {
        "norm_sq == 2k": r.norm_sq == 2 * args.k,
        "max displacement_sq == (2/k) norm_sq": Fraction(r.max_displacement_sq) == Fraction(2, args.k) * r.norm_sq,
        "rayleigh <= 8k": r.rayleigh <= 8 * args.k,
    }
    body = {
        "k": r.k,
        "vertex_count": r.vertex_count,
        "norm_sq": r.norm_sq,
        "max_displacement_sq": r.max_displacement_sq,
        "rayleigh": str(r.rayleigh),
        "checks": checks,
    }
    _emit_json({**_resolved(args), "result": body}, args.out)
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="praa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"praa {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw PRAA samples to CSV")
    s.add_argument("--group", required=True, help="group specification JSON")
    s.add_argument("--k", type=int, required=True, help="tuple length")
    s.add_argument("--steps", default="auto", help="lazy steps per sample, or 'auto' for the mixing bound")
    s.add_argument("--eps", type=float, default=math.exp(-1), help="target TV distance for --steps auto")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--first-stream", type=int, default=0, help="RNG stream of sample 0")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--meta", help="write a run-metadata JSON here")
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("bound", help="PRAA mixing-time bound (natural logarithms)",
                       description="Steps after which PRAA output is eps-close to uniform. "
                                   "All logarithms are natural.")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--order", type=int, help="group order |G|")
    b.add_argument("--log-order", type=float, help="natural log of |G|, for huge groups")
    b.add_argument("--eps", type=float, default=math.exp(-1))
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("explore", help="enumerate a walk graph, its spectral gap and TV decay")
    e.add_argument("--group", required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--family", choices=[schreier.CN, schreier.N_ONLY], default=schreier.CN,
                   help="CN: all moves (with accumulator); N: tuple moves only")
    e.add_argument("--budget", type=int, default=schreier.DEFAULT_VERTEX_BUDGET, help="vertex budget")
    e.add_argument("--out", help="summary JSON path (default stdout)")
    e.add_argument("--edges", help="write the edge list CSV here")
    e.add_argument("--tv-csv", help="write the TV-decay CSV here")
    e.add_argument("--steps", type=int, help="TV-decay horizon (default: the mixing bound)")
    e.add_argument("--every", type=int, help="TV-decay sampling interval")
    e.add_argument("--eps", type=float, default=math.exp(-1))
    e.set_defaults(func=cmd_explore)

    v = sub.add_parser("verify-ring", help="exact group-ring identity suites")
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--K", type=int, help="also check symmetrization from rank k to K")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify_ring)

    c = sub.add_parser("certify", help="verify a sum-of-squares certificate")
    c.add_argument("--cert", help="certificate JSON for A_k")
    c.add_argument("--toy-group", help="group JSON: certify Delta^2 - lambda0 Delta with an oracle certificate")
    c.add_argument("--lambda0", help="decimal lambda0 for --toy-group (default: optimum - 1e-9)")
    c.add_argument("--allow-large", action="store_true", help="ignore the basis-size budget")
    c.add_argument("--out", help="result JSON path (default stdout)")
    c.set_defaults(func=cmd_certify)

    h = sub.add_parser("sharpness", help="test vector on the action of A_k on Z_3^k")
    h.add_argument("--k", type=int, required=True)
    h.add_argument("--out")
    h.set_defaults(func=cmd_sharpness)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"praa: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"praa: resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
