"""Seeded synthetic robust-regression instances.

Every random component (model, covariance, design, corruption support,
corruption values, dense noise, adversarial model) draws from its own
sub-stream of the instance seed, so sweeping one knob leaves the others
fixed: changing ``sigma`` does not change ``X``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .exceptions import BadSpec

__all__ = [
    "UniformOblivious",
    "AdaptiveModelShift",
    "Identity",
    "DiagonalUniform",
    "Explicit",
    "InstanceSpec",
    "RegressionInstance",
    "gen_instance",
    "adaptive_adversary",
    "corruption_count",
    "save_instance",
    "load_instance",
]

# sub-stream keys; never renumber, saved instances depend on them
_W_STAR, _COVARIANCE, _DESIGN, _SUPPORT, _VALUES, _NOISE, _THETA_TILDE = range(7)


def _stream(seed, key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


@dataclass(frozen=True)
class UniformOblivious:
    """Corruptions ``b_i ~ U(-M ||y*||_inf, M ||y*||_inf)`` on a uniform support."""


@dataclass(frozen=True)
class AdaptiveModelShift:
    """Corruptions that make the corrupted samples fit ``theta_tilde``.

    When ``theta_tilde`` is None an independent random unit vector is drawn
    (with the same sparsity as ``w*`` when one is set).
    """

    theta_tilde: Optional[tuple] = None


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class DiagonalUniform:
    low: float = 0.0
    high: float = 5.0


@dataclass(frozen=True)
class Explicit:
    sigma: tuple = ()


@dataclass(frozen=True)
class InstanceSpec:
    p: int
    n: int
    sparsity_s_star: Optional[int] = None
    sigma: float = 0.0
    alpha: float = 0.0
    corruption_scale: float = 5.0
    adversary: Union[UniformOblivious, AdaptiveModelShift] = field(default_factory=UniformOblivious)
    covariance: Union[Identity, DiagonalUniform, Explicit] = field(default_factory=Identity)
    seed: int = 0

    def validate(self):
        if self.p < 1 or self.n < 1:
            raise BadSpec(f"need p, n >= 1, got p={self.p}, n={self.n}")
        if not 0.0 <= self.alpha < 0.5:
            raise BadSpec(f"alpha must lie in [0, 0.5), got {self.alpha}")
        if not self.sigma >= 0:
            raise BadSpec("sigma must be non-negative")
        if not self.corruption_scale >= 0:
            raise BadSpec("corruption_scale must be non-negative")
        if self.sparsity_s_star is not None and not 1 <= self.sparsity_s_star <= self.p:
            raise BadSpec("sparsity_s_star must lie in [1, p]")
        if not 0 <= self.seed < 2**64:
            raise BadSpec("seed must be a 64-bit unsigned integer")
        if isinstance(self.covariance, DiagonalUniform):
            if not 0 <= self.covariance.low <= self.covariance.high:
                raise BadSpec("DiagonalUniform needs 0 <= low <= high")
        elif isinstance(self.covariance, Explicit):
            sigma = np.asarray(self.covariance.sigma, dtype=float)
            if sigma.shape != (self.p, self.p):
                raise BadSpec("explicit covariance must be p x p")
        elif not isinstance(self.covariance, Identity):
            raise BadSpec(f"unknown covariance {self.covariance!r}")
        if isinstance(self.adversary, AdaptiveModelShift):
            tt = self.adversary.theta_tilde
            if tt is not None and len(tt) != self.p:
                raise BadSpec("theta_tilde must have length p")
        elif not isinstance(self.adversary, UniformOblivious):
            raise BadSpec(f"unknown adversary {self.adversary!r}")

    def to_dict(self):
        adv = self.adversary
        cov = self.covariance
        if isinstance(adv, AdaptiveModelShift):
            adv_d = {"kind": "AdaptiveModelShift",
                     "theta_tilde": None if adv.theta_tilde is None else list(adv.theta_tilde)}
        else:
            adv_d = {"kind": "UniformOblivious"}
        if isinstance(cov, DiagonalUniform):
            cov_d = {"kind": "DiagonalUniform", "low": cov.low, "high": cov.high}
        elif isinstance(cov, Explicit):
            cov_d = {"kind": "Explicit", "sigma": np.asarray(cov.sigma, dtype=float).tolist()}
        else:
            cov_d = {"kind": "Identity"}
        return {
            "p": self.p, "n": self.n, "sparsity_s_star": self.sparsity_s_star,
            "sigma": self.sigma, "alpha": self.alpha,
            "corruption_scale": self.corruption_scale,
            "adversary": adv_d, "covariance": cov_d, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        adv = d.pop("adversary", {"kind": "UniformOblivious"}) or {"kind": "UniformOblivious"}
        cov = d.pop("covariance", {"kind": "Identity"}) or {"kind": "Identity"}
        if isinstance(adv, str):
            adv = {"kind": adv}
        if isinstance(cov, str):
            cov = {"kind": cov}
        if adv["kind"] == "AdaptiveModelShift":
            tt = adv.get("theta_tilde")
            adversary = AdaptiveModelShift(None if tt is None else tuple(tt))
        elif adv["kind"] == "UniformOblivious":
            adversary = UniformOblivious()
        else:
            raise BadSpec(f"unknown adversary kind {adv['kind']!r}")
        if cov["kind"] == "DiagonalUniform":
            covariance = DiagonalUniform(cov.get("low", 0.0), cov.get("high", 5.0))
        elif cov["kind"] == "Explicit":
            covariance = Explicit(tuple(map(tuple, cov["sigma"])))
        elif cov["kind"] == "Identity":
            covariance = Identity()
        else:
            raise BadSpec(f"unknown covariance kind {cov['kind']!r}")
        return cls(adversary=adversary, covariance=covariance, **d)


@dataclass
class RegressionInstance:
    """``y = X^T w_star + b + eps`` with ``clean_set`` the complement of supp(b)."""

    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    b: np.ndarray
    eps: np.ndarray
    clean_set: np.ndarray
    spec: Optional[InstanceSpec] = None
    theta_tilde: Optional[np.ndarray] = None

    @property
    def p(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def y_star(self):
        return self.X.T @ self.w_star


def corruption_count(alpha, n):
    """``floor(alpha n)``, robust to float noise in the product."""
    return math.floor(round(alpha * n, 9))


def _random_model(rng, p, s):
    if s is None:
        w = rng.standard_normal(p)
    else:
        w = np.zeros(p)
        support = np.sort(rng.choice(p, size=s, replace=False))
        w[support] = rng.standard_normal(s)
    return w / np.linalg.norm(w)


def _design(spec):
    rng = _stream(spec.seed, _DESIGN)
    Z = rng.standard_normal((spec.n, spec.p)).T
    cov = spec.covariance
    if isinstance(cov, DiagonalUniform):
        diag = _stream(spec.seed, _COVARIANCE).uniform(cov.low, cov.high, spec.p)
        X = np.sqrt(diag)[:, None] * Z
    elif isinstance(cov, Explicit):
        sigma = np.asarray(cov.sigma, dtype=float)
        evals, evecs = np.linalg.eigh((sigma + sigma.T) / 2)
        if evals.min() < -1e-12 * max(1.0, abs(evals).max()):
            raise BadSpec("explicit covariance is not positive semidefinite")
        root = evecs * np.sqrt(np.clip(evals, 0, None))
        X = root @ Z
    else:
        X = Z
    return np.asfortranarray(X)


def _support(seed, n, m):
    rng = _stream(seed, _SUPPORT)
    return np.sort(rng.choice(n, size=m, replace=False)) if m else np.array([], dtype=int)


def adaptive_adversary(X, w_star, theta_tilde, alpha, seed=0, support=None):
    """Corrupt a ``floor(alpha n)`` subset so those samples fit ``theta_tilde``.

    Sets ``b_i = x_i^T (theta_tilde - w_star)`` on a uniformly drawn support
    (or the given ``support``) and zero elsewhere. At ``alpha = 0.5`` the
    corrupted half is exactly consistent with ``theta_tilde``, so no method
    can tell the two models apart.
    """
    if not 0.0 <= alpha <= 0.5:
        raise BadSpec(f"alpha must lie in [0, 0.5], got {alpha}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    n = X.shape[1]
    if support is None:
        support = _support(seed, n, corruption_count(alpha, n))
    support = np.asarray(support, dtype=int)
    shift = np.asarray(theta_tilde, dtype=float).ravel() - np.asarray(w_star, dtype=float).ravel()
    b = np.zeros(n)
    b[support] = X[:, support].T @ shift
    return b


def gen_instance(spec: InstanceSpec) -> RegressionInstance:
    """Draw one instance; fully determined by ``spec`` (including its seed)."""
    spec.validate()
    p, n = spec.p, spec.n
    w_star = _random_model(_stream(spec.seed, _W_STAR), p, spec.sparsity_s_star)
    X = _design(spec)
    y_star = X.T @ w_star

    m = corruption_count(spec.alpha, n)
    support = _support(spec.seed, n, m)
    b = np.zeros(n)
    theta_tilde = None
    if isinstance(spec.adversary, AdaptiveModelShift):
        if spec.adversary.theta_tilde is None:
            theta_tilde = _random_model(_stream(spec.seed, _THETA_TILDE), p, spec.sparsity_s_star)
        else:
            theta_tilde = np.asarray(spec.adversary.theta_tilde, dtype=float)
        b = adaptive_adversary(X, w_star, theta_tilde, spec.alpha, support=support)
    elif m:
        bound = spec.corruption_scale * float(np.max(np.abs(y_star)))
        b[support] = _stream(spec.seed, _VALUES).uniform(-bound, bound, m)

    eps = np.zeros(n)
    if spec.sigma > 0:
        eps = spec.sigma * _stream(spec.seed, _NOISE).standard_normal(n)

    clean = np.ones(n, dtype=bool)
    clean[support] = False
    return RegressionInstance(
        X=X, y=y_star + b + eps, w_star=w_star, b=b, eps=eps,
        clean_set=np.flatnonzero(clean), spec=spec, theta_tilde=theta_tilde,
    )


# -- file format -------------------------------------------------------------

META_FILE = "meta.json"
DATA_FILE = "data.csv"


def _fmt(v):
    return format(float(v), ".17g")


def _csv_bytes(inst):
    p, n = inst.X.shape
    clean = np.zeros(n, dtype=bool)
    clean[inst.clean_set] = True
    lines = [",".join(["index"] + [f"x_{j + 1}" for j in range(p)] + ["y", "b", "eps", "is_clean"])]
    for i in range(n):
        row = [str(i)] + [_fmt(v) for v in inst.X[:, i]]
        row += [_fmt(inst.y[i]), _fmt(inst.b[i]), _fmt(inst.eps[i]), "1" if clean[i] else "0"]
        lines.append(",".join(row))
    return ("\r\n".join(lines) + "\r\n").encode("utf-8")


def _digest(data):
    return hashlib.sha256(data).hexdigest()


def model_digest(w):
    return _digest(",".join(_fmt(v) for v in np.asarray(w).ravel()).encode())


def save_instance(inst: RegressionInstance, directory):
    """Write ``meta.json`` and ``data.csv`` into ``directory``.

    Floats are written with 17 significant digits, so a reload reproduces
    every array bit for bit. ``meta.json`` carries the spec, ``w_star`` and
    SHA-256 digests of the CSV bytes and of ``w_star``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = _csv_bytes(inst)
    (directory / DATA_FILE).write_bytes(data)
    meta = {
        "format": "torrent-instance/1",
        "p": inst.p,
        "n": inst.n,
        "spec": inst.spec.to_dict() if inst.spec is not None else None,
        "seed": inst.spec.seed if inst.spec is not None else None,
        "w_star": [_fmt(v) for v in inst.w_star],
        "theta_tilde": None if inst.theta_tilde is None else [_fmt(v) for v in inst.theta_tilde],
        "digests": {"data_csv_sha256": _digest(data), "w_star_sha256": model_digest(inst.w_star)},
    }
    (directory / META_FILE).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return directory


def load_instance(directory, verify=True) -> RegressionInstance:
    """Read an instance written by :func:`save_instance`."""
    directory = Path(directory)
    meta = json.loads((directory / META_FILE).read_text(encoding="utf-8"))
    data = (directory / DATA_FILE).read_bytes()
    if verify and _digest(data) != meta["digests"]["data_csv_sha256"]:
        raise BadSpec(f"{directory / DATA_FILE} does not match its recorded digest")

    p, n = int(meta["p"]), int(meta["n"])
    rows = list(csv.reader(data.decode("utf-8").splitlines()))
    header, body = rows[0], rows[1:]
    if len(header) != p + 5 or len(body) != n:
        raise BadSpec("data.csv shape disagrees with meta.json")
    table = np.array([[float(v) for v in row[1:-1]] for row in body]).reshape(n, p + 3)
    clean = np.array([row[-1] == "1" for row in body])
    spec = InstanceSpec.from_dict(meta["spec"]) if meta.get("spec") else None
    tt = meta.get("theta_tilde")
    return RegressionInstance(
        X=np.asfortranarray(table[:, :p].T),
        y=table[:, p].copy(),
        w_star=np.array([float(v) for v in meta["w_star"]]),
        b=table[:, p + 1].copy(),
        eps=table[:, p + 2].copy(),
        clean_set=np.flatnonzero(clean),
        spec=spec,
        theta_tilde=None if tt is None else np.array([float(v) for v in tt]),
    )
