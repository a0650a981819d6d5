"""Discrete anchored fixed-point methods over resolvents.

All methods share the pattern x^k = J_{hA}(y^{k-1}) followed by an anchored
combination step; they differ only in the anchor weight sequence.  The
recorded residual selection (y^{k-1} - x^k) / h lies in A(x^k) regardless
of the step h.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import operators as ops
from . import schedules as sched
from .errors import ConfigError, DimensionMismatch

# Iteration indexing starts at k = 1 for the first resolvent application.


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 1000
    h: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.h > 0:
            raise ConfigError(f"resolvent step must be positive, got {self.h}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class IterateLog:
    """Recorded iterates of an anchored method.

    ``ks`` holds the recorded iteration indices; ``residuals[i]`` is
    (y^{k-1} - x^k) / h at k = ks[i], so y^{k-1} is recoverable as
    x^k + h * residual for re-verification against the resolvent.
    """

    ks: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray
    betas: np.ndarray
    h: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ks)
        if not (len(self.xs) == len(self.ys) == len(self.residuals) == len(self.betas) == n):
            raise ConfigError("iterate log arrays must share their leading length")
        for arr in (self.ks, self.xs, self.ys, self.residuals, self.betas):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def residual_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.residuals, self.residuals)


def _check_start(op: ops.OperatorSpec, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (op.dim,):
        raise DimensionMismatch(f"x0 shape {x0.shape} does not match operator dim {op.dim}")
    return x0


def _run_anchored(op: ops.OperatorSpec, x0, cfg: SolverConfig,
                  weight_fn: Callable[[int, np.ndarray, np.ndarray], float],
                  meta: dict) -> IterateLog:
    """Common driver: x^k = J_{hA} y^{k-1}; y^k mixes the reflected step
    2x^k - y^{k-1} with the anchor x^0 using weight_fn(k, raw_residual, x^k)."""
    x0 = _check_start(op, x0)
    prox = ops.make_resolvent(op, cfg.h)
    y = x0.copy()
    ks, xs, ys, resids, betas = [], [], [], [], []
    for k in range(1, cfg.max_iter + 1):
        x = prox(y)
        raw = y - x  # equals h * (selection in A(x))
        beta = weight_fn(k, raw, x)
        y = (1.0 - beta) * (2.0 * x - y) + beta * x0
        if k % cfg.record_every == 0 or k == cfg.max_iter:
            ks.append(k)
            xs.append(x)
            ys.append(y)
            resids.append(raw / cfg.h)
            betas.append(beta)
    return IterateLog(ks=np.array(ks), xs=np.array(xs), ys=np.array(ys),
                      residuals=np.array(resids), betas=np.array(betas),
                      h=cfg.h, meta=meta)


def run_generalized_anchor(op: ops.OperatorSpec, gamma: float, p: float, x0,
                           cfg: SolverConfig) -> IterateLog:
    """Anchored resolvent iteration with weights gamma / (k^p + gamma).

    Reduces to the accelerated proximal point method at gamma = 1, p = 1.
    A step h != 1 applies the same recursion to the scaled operator hA.
    """
    if not (gamma > 0 and p > 0):
        raise ConfigError(f"need gamma > 0 and p > 0, got {gamma}, {p}")

    def weight(k, raw, x):
        return gamma / (float(k) ** p + gamma)

    meta = {"method": "generalized_anchor", "operator": op.kind,
            "gamma": gamma, "p": p, "h": cfg.h}
    return _run_anchored(op, x0, cfg, weight, meta)


def run_appm(op: ops.OperatorSpec, x0, cfg: SolverConfig) -> IterateLog:
    """Accelerated proximal point method: anchor weight 1/(k+1) at step k."""

    def weight(k, raw, x):
        return 1.0 / (k + 1.0)

    meta = {"method": "appm", "operator": op.kind, "h": cfg.h}
    return _run_anchored(op, x0, cfg, weight, meta)


def run_halpern(op: ops.OperatorSpec, beta_seq: Sequence[float], y0,
                cfg: SolverConfig) -> IterateLog:
    """Halpern iteration y^{k+1} = beta_k y^0 + (1 - beta_k) T y^k with T the
    reflected resolvent of hA.

    With beta_k = 1/(k+2) the y iterates coincide with run_appm's.  The
    recorded x^{k+1} = J_{hA}(y^k) is the resolvent point inside T.
    """
    beta_seq = np.asarray(beta_seq, dtype=float)
    if len(beta_seq) < cfg.max_iter:
        raise ConfigError(
            f"need {cfg.max_iter} anchor weights, got {len(beta_seq)}")
    if np.any(beta_seq < 0) or np.any(beta_seq > 1):
        raise ConfigError("Halpern weights must lie in [0, 1]")
    y0 = _check_start(op, y0)
    prox = ops.make_resolvent(op, cfg.h)
    y = y0.copy()
    ks, xs, ys, resids, betas = [], [], [], [], []
    for k in range(1, cfg.max_iter + 1):
        beta = float(beta_seq[k - 1])
        x = prox(y)
        raw = y - x
        reflected = 2.0 * x - y
        y = beta * y0 + (1.0 - beta) * reflected
        if k % cfg.record_every == 0 or k == cfg.max_iter:
            ks.append(k)
            xs.append(x)
            ys.append(y)
            resids.append(raw / cfg.h)
            betas.append(beta)
    meta = {"method": "halpern", "operator": op.kind, "h": cfg.h}
    return IterateLog(ks=np.array(ks), xs=np.array(xs), ys=np.array(ys),
                      residuals=np.array(resids), betas=np.array(betas),
                      h=cfg.h, meta=meta)


def run_osppm(op: ops.OperatorSpec, mu: float, x0, cfg: SolverConfig) -> IterateLog:
    """Proximal point method with exponentially decaying anchor weights for
    mu-strongly monotone operators.

    With nu = 1 + 2 h mu the anchor weight at step k is 1/s_k where
    s_k = 1 + nu^2 + ... + nu^{2k}.  The weight is advanced through the
    reciprocal recurrence r_k = r_{k-1} / (nu^2 + r_{k-1}), which never
    overflows no matter how large nu^{2k} grows.  mu = 0 degenerates to the
    accelerated proximal point method.
    """
    if mu < 0:
        raise ConfigError(f"mu must be nonnegative, got {mu}")
    x0 = _check_start(op, x0)
    nu = 1.0 + 2.0 * cfg.h * mu
    nu_sq = nu * nu
    prox = ops.make_resolvent(op, cfg.h)
    y = x0.copy()
    r = 1.0  # r_k = 1 / s_k, starting from s_0 = 1
    ks, xs, ys, resids, betas = [], [], [], [], []
    for k in range(1, cfg.max_iter + 1):
        r = r / (nu_sq + r)
        x = prox(y)
        raw = y - x
        y = (1.0 - r) * (x - (raw / nu)) + r * x0
        if k % cfg.record_every == 0 or k == cfg.max_iter:
            ks.append(k)
            xs.append(x)
            ys.append(y)
            resids.append(raw / cfg.h)
            betas.append(r)
    meta = {"method": "osppm", "operator": op.kind, "mu": mu, "h": cfg.h}
    return IterateLog(ks=np.array(ks), xs=np.array(xs), ys=np.array(ys),
                      residuals=np.array(resids), betas=np.array(betas),
                      h=cfg.h, meta=meta)


def run_adaptive(op: ops.OperatorSpec, x0, cfg: SolverConfig) -> IterateLog:
    """Anchored method whose weight is computed from the current residual:
    beta_k = |r|^2 / (-<r, x^k - x^0> + |r|^2) with r = y^{k-1} - x^k.

    The weight is 1/2 at the first step and stays in [0, 1); once the
    residual hits zero the iterates are stationary.
    """
    x0_arr = _check_start(op, x0)

    def weight(k, raw, x):
        return sched.beta_adaptive_discrete(raw, x, x0_arr)

    meta = {"method": "adaptive", "operator": op.kind, "h": cfg.h}
    return _run_anchored(op, x0_arr, cfg, weight, meta)
