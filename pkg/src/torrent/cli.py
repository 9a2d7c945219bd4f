"""Command-line front end.

Subcommands::

    torrent gen    --p 20 --n 1000 --alpha 0.3 --seed 1 --out inst/
    torrent fit    inst/ --variant HYB --beta 0.35 --out fit/
    torrent phase  --spec phase.json --seed 7 --out phase.csv
    torrent sweep  --ns 500,1000,2000 --alphas 0.2 --seed 7 --out sweep.csv
    torrent race   --p 2000 --n 10000 --alpha 0.3 --solvers FC,HYB --seed 7 --out race.csv
    torrent probe  inst/ --gamma 0.35 --gamma 0.65 --mode sampled --beta 0.35

Exit status is 0 on success, 1 when a solver stops at its iteration cap and
2 for usage, input or file errors. The pool size of ``phase``/``sweep``/
``race`` is read from the ``TORRENT_WORKERS`` environment variable unless
``--workers`` is given.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench
from .datagen import (AdaptiveModelShift, DiagonalUniform, Identity, InstanceSpec,
                      UniformOblivious, gen_instance, load_instance, save_instance)
from .exceptions import BadSpec, BudgetExceeded, MissingReport, NotConverged, TorrentError
from .l1 import SOLVER_ID, L1Config, l1_grid_fit, l1_solve
from .probe import check_convergence_condition, estimate_subset_spectrum
from .solvers import SolverConfig, Termination, torrent_solve

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# -- gen ---------------------------------------------------------------------

def cmd_gen(args):
    if args.spec:
        spec = InstanceSpec.from_dict(_read_json(args.spec))
        if args.seed is not None:
            spec = InstanceSpec(**{**spec.__dict__, "seed": args.seed})
    else:
        if args.p is None or args.n is None:
            raise UsageError("gen needs --spec or both --p and --n")
        adversary = AdaptiveModelShift() if args.adversary == "AdaptiveModelShift" else UniformOblivious()
        covariance = (DiagonalUniform(args.cov_low, args.cov_high)
                      if args.covariance == "DiagonalUniform" else Identity())
        spec = InstanceSpec(p=args.p, n=args.n, sparsity_s_star=args.sparsity_s_star,
                            sigma=args.sigma, alpha=args.alpha,
                            corruption_scale=args.corruption_scale, adversary=adversary,
                            covariance=covariance, seed=args.seed or 0)
    inst = gen_instance(spec)
    save_instance(inst, args.out)
    print(args.out)
    return EXIT_OK


# -- fit ---------------------------------------------------------------------

TRACE_FIELDS = ["iter", "update_kind", "active_residual_norm", "set_churn", "elapsed",
                "model_error", "corruption_mass"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_trace(trace, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(TRACE_FIELDS)
        for rec in trace:
            d = asdict(rec)
            writer.writerow([_fmt(d[f]) for f in TRACE_FIELDS])


def cmd_fit(args):
    inst = load_instance(args.instance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"instance": str(args.instance)}

    if args.variant == "L1":
        cfg = L1Config(lam=args.lam, admm_rho=args.admm_rho, max_iters=args.max_iters)
        if args.lambda_grid:
            fit, _ = l1_grid_fit(inst.X, inst.y, args.lambda_grid, cfg=cfg, beta=args.beta)
        else:
            fit = l1_solve(inst.X, inst.y, cfg, raise_on_fail=False)
        report.update({
            "solver": SOLVER_ID, "lam": fit.lam, "model": fit.model.tolist(),
            "iters": fit.iters, "converged": fit.converged, "wall_time": fit.wall_time,
            "lambda_grid": list(map(float, args.lambda_grid or [])),
        })
        model, failed = fit.model, not fit.converged
    else:
        cfg = SolverConfig(variant=args.variant, beta=args.beta, epsilon=args.epsilon,
                           step_size=args.step_size, delta=args.delta,
                           max_iters=args.max_iters, rel_change_tol=args.rel_change_tol,
                           sparsity_s=args.sparsity_s, warm_start=args.warm_start)
        result = torrent_solve(inst.X, inst.y, cfg, ground_truth=inst.w_star, corruption=inst.b)
        _write_trace(result.trace, out / "trace.csv")
        report.update({"config": cfg.to_dict(), **result.to_dict()})
        model, failed = result.model, result.termination is Termination.MAX_ITERS

    err = float(np.linalg.norm(model - inst.w_star))
    report["model_error"] = err
    report["relative_error"] = err / float(np.linalg.norm(inst.w_star))
    _write_json(report, out / "fit.json")
    print(json.dumps({k: report[k] for k in ("model_error", "relative_error")}))
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


# -- phase / sweep / race ----------------------------------------------------

_AXES = ("alphas", "ns", "ps", "sigmas", "scales")


def _experiment(args, kind):
    d = _read_json(args.spec) if args.spec else {}
    d["kind"] = kind
    for name in _AXES + ("trials_per_cell", "success_threshold", "beta", "sparsity_s_star",
                         "adversary", "covariance", "lambda_grid"):
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if args.solvers:
        d["solvers"] = args.solvers.split(",")
    d["seed"] = args.seed
    return bench.ExperimentSpec.from_dict(d)


def cmd_experiment(args):
    kind = {"phase": "Phase", "sweep": "Sweep", "race": "Race"}[args.command]
    spec = _experiment(args, kind)
    if kind == "Race":
        rows = bench.run_race(spec, workers=args.workers)
    else:
        rows = bench.run_phase(spec, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bench.write_csv(rows, out)
    bench.write_metadata(spec, out.with_suffix(".json"))
    print(out)
    return EXIT_OK


# -- probe -------------------------------------------------------------------

def cmd_probe(args):
    inst = load_instance(args.instance)
    gammas = list(args.gamma or [])
    if args.beta is not None:
        for g in (args.beta, 1 - args.beta):
            if not any(abs(g - h) < 1e-9 for h in gammas):
                gammas.append(g)
    if not gammas:
        raise UsageError("probe needs --gamma or --beta")
    reports = [estimate_subset_spectrum(inst.X, g, mode=args.mode, sparsity=args.sparsity,
                                        trials=args.trials, seed=args.seed)
               for g in gammas]
    out = {"reports": [r.to_json() for r in reports]}
    if args.beta is not None:
        out["verdict"] = asdict(check_convergence_condition(
            reports, args.variant, args.beta, eta=args.eta, dense_noise=args.dense_noise,
            sparsity=args.sparsity))
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="torrent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--spec", help="InstanceSpec JSON file")
    g.add_argument("--p", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--sparsity-s-star", type=int)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--corruption-scale", type=float, default=5.0)
    g.add_argument("--adversary", choices=["UniformOblivious", "AdaptiveModelShift"],
                   default="UniformOblivious")
    g.add_argument("--covariance", choices=["Identity", "DiagonalUniform"], default="Identity")
    g.add_argument("--cov-low", type=float, default=0.0)
    g.add_argument("--cov-high", type=float, default=5.0)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit one instance")
    f.add_argument("instance")
    f.add_argument("--variant", choices=["FC", "GD", "HYB", "HD", "L1"], default="FC")
    f.add_argument("--beta", type=float, default=0.25)
    f.add_argument("--epsilon", type=float, default=1e-8)
    f.add_argument("--step-size", type=float)
    f.add_argument("--delta", type=int, default=0)
    f.add_argument("--max-iters", type=int)
    f.add_argument("--rel-change-tol", type=float, default=1e-14)
    f.add_argument("--sparsity-s", type=int)
    f.add_argument("--warm-start", action="store_true")
    f.add_argument("--lam", type=float, default=1.0)
    f.add_argument("--admm-rho", type=float, default=1.0)
    f.add_argument("--lambda-grid", type=_floats)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    for name, help_ in (("phase", "success-rate grid"), ("sweep", "recovery vs. one knob"),
                        ("race", "error-vs-time trajectories")):
        e = sub.add_parser(name, help=help_)
        e.add_argument("--spec", help="ExperimentSpec JSON file")
        e.add_argument("--alphas", type=_floats)
        e.add_argument("--ns", type=_ints)
        e.add_argument("--ps", "--p", dest="ps", type=_ints)
        e.add_argument("--sigmas", type=_floats)
        e.add_argument("--scales", type=_floats)
        e.add_argument("--trials-per-cell", type=int)
        e.add_argument("--solvers", help="comma-separated, e.g. FC,HYB,L1")
        e.add_argument("--success-threshold", type=float)
        e.add_argument("--beta", type=float)
        e.add_argument("--sparsity-s-star", type=int)
        e.add_argument("--adversary", choices=["UniformOblivious", "AdaptiveModelShift"])
        e.add_argument("--covariance", choices=["Identity", "DiagonalUniform"])
        e.add_argument("--lambda-grid", type=_floats)
        e.add_argument("--seed", type=int, required=True)
        e.add_argument("--workers", type=int)
        e.add_argument("--out", required=True)
        e.set_defaults(func=cmd_experiment)

    p = sub.add_parser("probe", help="subset strong convexity/smoothness constants")
    p.add_argument("instance")
    p.add_argument("--gamma", type=float, action="append")
    p.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--sparsity", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, help="also evaluate the convergence condition")
    p.add_argument("--variant", choices=["FC", "GD", "HYB", "HD"], default="FC")
    p.add_argument("--eta", type=float)
    p.add_argument("--dense-noise", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "max_iters", "unset") is None:
        args.max_iters = 5000 if args.variant == "L1" else 400
    try:
        return args.func(args)
    except NotConverged as exc:
        print(f"torrent: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (OSError, UsageError, BadSpec, BudgetExceeded, MissingReport, TorrentError,
            ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"torrent: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
