"""Benchmark harness: phase-transition grids, knob sweeps and timing races.

Each cell of an experiment grid gets a seed hashed from the base seed and
the cell's coordinate *values*, and every trial seed is hashed from the
cell seed and the trial number. A single cell can therefore be re-run on
its own and reproduces its row. Results are merged in grid order, so the
size of the worker pool never changes the output.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .datagen import (AdaptiveModelShift, DiagonalUniform, Identity, InstanceSpec,
                      UniformOblivious, gen_instance)
from .exceptions import BadSpec
from .l1 import DEFAULT_LAMBDA_GRID, SOLVER_ID, L1Config, l1_grid_fit, l1_solve
from .solvers import SolverConfig, torrent_solve

__all__ = [
    "WORKERS_ENV",
    "SolverSpec",
    "ExperimentSpec",
    "CellResult",
    "cell_seed",
    "trial_seed",
    "instance_digest",
    "relative_error",
    "is_success",
    "run_phase",
    "run_race",
    "write_csv",
]

WORKERS_ENV = "TORRENT_WORKERS"
KINDS = ("Phase", "Sweep", "Race")
TORRENT_VARIANTS = ("FC", "GD", "HYB", "HD")


@dataclass(frozen=True)
class SolverSpec:
    """A named solver: a TORRENT variant or ``"L1"`` plus config overrides."""

    variant: str
    params: dict = field(default_factory=dict, hash=False)
    name: Optional[str] = None

    @property
    def label(self):
        return self.name or self.variant

    @classmethod
    def parse(cls, obj):
        if isinstance(obj, SolverSpec):
            return obj
        if isinstance(obj, str):
            return cls(variant=obj.upper())
        return cls(variant=str(obj["variant"]).upper(), params=dict(obj.get("params", {})),
                   name=obj.get("name"))


@dataclass
class ExperimentSpec:
    kind: str = "Phase"
    alphas: list = field(default_factory=lambda: [0.0])
    ns: list = field(default_factory=lambda: [1000])
    ps: list = field(default_factory=lambda: [20])
    sigmas: list = field(default_factory=lambda: [0.0])
    scales: list = field(default_factory=lambda: [5.0])
    trials_per_cell: Optional[int] = None
    solvers: list = field(default_factory=lambda: ["FC", "HYB"])
    success_threshold: float = 1e-4
    seed: Optional[int] = None
    beta: Optional[float] = None
    beta_margin: float = 0.05
    sparsity_s_star: Optional[int] = None
    adversary: str = "UniformOblivious"
    covariance: str = "Identity"
    cov_low: float = 0.0
    cov_high: float = 5.0
    lambda_grid: Optional[list] = None

    def __post_init__(self):
        self.kind = self.kind.capitalize()
        if self.kind not in KINDS:
            raise BadSpec(f"kind must be one of {KINDS}")
        if self.trials_per_cell is None:
            self.trials_per_cell = 100 if self.kind == "Phase" else 20
        self.solvers = [SolverSpec.parse(s) for s in self.solvers]
        for axis in ("alphas", "ns", "ps", "sigmas", "scales"):
            if not getattr(self, axis):
                raise BadSpec(f"{axis} grid is empty")
        if self.trials_per_cell < 1:
            raise BadSpec("trials_per_cell must be >= 1")
        if not self.solvers:
            raise BadSpec("no solvers given")
        for s in self.solvers:
            if s.variant not in TORRENT_VARIANTS + ("L1",):
                raise BadSpec(f"unknown solver {s.variant!r}")
        if self.seed is None:
            raise BadSpec("a base seed is required")
        if self.adversary not in ("UniformOblivious", "AdaptiveModelShift"):
            raise BadSpec(f"unknown adversary {self.adversary!r}")
        if self.covariance not in ("Identity", "DiagonalUniform"):
            raise BadSpec(f"unknown covariance {self.covariance!r}")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["solvers"] = [{"variant": s.variant, "params": s.params, "name": s.name}
                        for s in self.solvers]
        return d

    def cells(self):
        return list(itertools.product(self.alphas, self.ns, self.ps, self.sigmas, self.scales))

    def beta_for(self, alpha):
        if self.beta is not None:
            return self.beta
        return float(min(max(alpha + self.beta_margin, self.beta_margin), 0.49))


@dataclass
class CellResult:
    alpha: float
    n: int
    p: int
    sigma: float
    scale: float
    solver: str
    trials: int
    successes: int
    success_rate: float
    median_error: float
    median_wall_time: float
    median_iters: float
    cell_seed: int


# -- seeding -----------------------------------------------------------------

def _float_word(v):
    return struct.unpack("<Q", struct.pack("<d", float(v)))[0]


def cell_seed(base, cell):
    """64-bit seed for one grid cell, hashed from the base seed and coordinates."""
    words = [_float_word(v) for v in cell]
    ss = np.random.SeedSequence(int(base), spawn_key=tuple(words))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_seed(cseed, trial):
    ss = np.random.SeedSequence(int(cseed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


def instance_digest(inst):
    h = hashlib.sha256()
    for a in (inst.X, inst.y, inst.w_star):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def relative_error(theta, w_star):
    return float(np.linalg.norm(np.asarray(theta) - w_star) / np.linalg.norm(w_star))


def is_success(theta, w_star, threshold):
    """``||theta - w*||_2 < threshold * ||w*||_2``."""
    return bool(np.linalg.norm(np.asarray(theta) - w_star) < threshold * np.linalg.norm(w_star))


# -- running -----------------------------------------------------------------

def _instance_spec(spec, cell, seed):
    alpha, n, p, sigma, scale = cell
    adversary = AdaptiveModelShift() if spec.adversary == "AdaptiveModelShift" else UniformOblivious()
    covariance = (DiagonalUniform(spec.cov_low, spec.cov_high)
                  if spec.covariance == "DiagonalUniform" else Identity())
    return InstanceSpec(p=int(p), n=int(n), sparsity_s_star=spec.sparsity_s_star,
                        sigma=float(sigma), alpha=float(alpha), corruption_scale=float(scale),
                        adversary=adversary, covariance=covariance, seed=seed)


def _torrent_config(spec, solver, alpha):
    params = dict(solver.params)
    params.setdefault("beta", spec.beta_for(alpha))
    if solver.variant == "HD" and "sparsity_s" not in params:
        if spec.sparsity_s_star is None:
            raise BadSpec("HD needs sparsity_s or sparsity_s_star")
        params["sparsity_s"] = 2 * spec.sparsity_s_star
    return SolverConfig(variant=solver.variant, **params)


def _run_solver(spec, solver, inst, alpha):
    """Returns (model, wall_time, iterations)."""
    if solver.variant == "L1":
        grid = solver.params.get("lambda_grid", spec.lambda_grid) or DEFAULT_LAMBDA_GRID
        base = L1Config(**{k: v for k, v in solver.params.items() if k != "lambda_grid"})
        best, _ = l1_grid_fit(inst.X, inst.y, grid, ground_truth=inst.w_star, cfg=base)
        return best.model, best.wall_time, best.iters
    result = torrent_solve(inst.X, inst.y, _torrent_config(spec, solver, alpha))
    return result.model, result.wall_time, result.n_iters


def _phase_task(args):
    spec, cell, cseed, trial = args
    inst = gen_instance(_instance_spec(spec, cell, trial_seed(cseed, trial)))
    out = []
    for solver in spec.solvers:
        model, wall, iters = _run_solver(spec, solver, inst, cell[0])
        err = float(np.linalg.norm(model - inst.w_star))
        out.append((err, is_success(model, inst.w_star, spec.success_threshold), wall, iters))
    return out


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_phase(spec: ExperimentSpec, workers=None):
    """Success rates over the experiment grid; one CellResult per cell and solver."""
    cells = spec.cells()
    seeds = [cell_seed(spec.seed, c) for c in cells]
    tasks = [(spec, c, s, t) for c, s in zip(cells, seeds) for t in range(spec.trials_per_cell)]
    outputs = _map(_phase_task, tasks, _workers(workers))

    rows = []
    T = spec.trials_per_cell
    for ci, (cell, cseed) in enumerate(zip(cells, seeds)):
        block = outputs[ci * T:(ci + 1) * T]
        for si, solver in enumerate(spec.solvers):
            errs = [b[si][0] for b in block]
            succ = sum(b[si][1] for b in block)
            alpha, n, p, sigma, scale = cell
            rows.append(CellResult(
                alpha=float(alpha), n=int(n), p=int(p), sigma=float(sigma), scale=float(scale),
                solver=solver.label, trials=T, successes=int(succ), success_rate=succ / T,
                median_error=float(np.median(errs)),
                median_wall_time=float(np.median([b[si][2] for b in block])),
                median_iters=float(np.median([b[si][3] for b in block])),
                cell_seed=cseed,
            ))
    return rows


def _race_task(args):
    spec, cell, cseed, trial = args
    tseed = trial_seed(cseed, trial)
    inst = gen_instance(_instance_spec(spec, cell, tseed))
    digest = instance_digest(inst)
    norm = float(np.linalg.norm(inst.w_star))
    rows = []
    for solver in spec.solvers:
        if solver.variant == "L1":
            cfg = L1Config(**{k: v for k, v in solver.params.items() if k != "lambda_grid"})
            samples = []
            start = time.perf_counter()

            def record(k, theta):
                samples.append((k, time.perf_counter() - start,
                                float(np.linalg.norm(theta - inst.w_star))))

            fit = l1_solve(inst.X, inst.y, cfg, callback=record, raise_on_fail=False)
            kind = SOLVER_ID
            total = fit.wall_time
        else:
            result = torrent_solve(inst.X, inst.y, _torrent_config(spec, solver, cell[0]),
                                   ground_truth=inst.w_star)
            samples = [(r.iter, r.elapsed, r.model_error) for r in result.trace]
            kind = "torrent"
            total = result.wall_time
        for k, t, e in samples:
            rows.append({
                "trial": trial, "trial_seed": tseed, "cell_seed": cseed,
                "instance_digest": digest, "solver": solver.label, "solver_kind": kind,
                "iter": k, "time": t, "error": e, "relative_error": e / norm,
                "total_time": total,
            })
    return rows


def run_race(spec: ExperimentSpec, workers=None):
    """Error-vs-time trajectories of every solver on identical instances.

    Uses the first value of each grid axis. Returns a list of row dicts.
    """
    cell = (spec.alphas[0], spec.ns[0], spec.ps[0], spec.sigmas[0], spec.scales[0])
    cseed = cell_seed(spec.seed, cell)
    tasks = [(spec, cell, cseed, t) for t in range(spec.trials_per_cell)]
    return [row for rows in _map(_race_task, tasks, _workers(workers)) for row in rows]


# -- output ------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def write_csv(rows, path=None):
    """RFC 4180 CSV (CRLF, UTF-8, 17-digit floats). Returns the text."""
    rows = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    buf = io.StringIO()
    if rows:
        writer = csv.writer(buf, lineterminator="\r\n")
        header = list(rows[0].keys())
        writer.writerow(header)
        for r in rows:
            writer.writerow([_cell(r[h]) for h in header])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def experiment_metadata(spec):
    from . import __version__

    return {
        "package_version": __version__,
        "experiment": spec.to_dict(),
        "l1_solver": SOLVER_ID,
        "l1_lambda_grid": list(map(float, spec.lambda_grid or DEFAULT_LAMBDA_GRID)),
        "success_rule": "||theta - w*||_2 < success_threshold * ||w*||_2",
    }


def write_metadata(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(experiment_metadata(spec), fh, indent=2)
        fh.write("\n")
