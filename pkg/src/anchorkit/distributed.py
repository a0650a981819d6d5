"""Decentralized compressed sensing over a mixing network.

Agents hold private least-squares measurements of a shared sparse signal
and run a proximal-gradient consensus iteration (mixing step, local gradient
step, soft-thresholding prox, plus an accumulated disagreement correction).
The whole update is a half-averaged fixed-point map on the stacked
(primal, correction) state with respect to a metric built from the mixing
matrix, which is what makes anchored wrappers applicable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import schedules as sched
from .errors import (
    ConfigError,
    DisconnectedGraph,
    DimensionMismatch,
    NonpositiveDenominator,
    StepSizeTooLarge,
)
from .operators import soft_threshold

TOPOLOGIES = ("path", "ring", "erdos_renyi", "explicit")


@dataclass(frozen=True)
class NetworkGraph:
    n_agents: int
    edges: frozenset
    mixing: np.ndarray

    def __post_init__(self):
        self.mixing.setflags(write=False)


@dataclass(frozen=True)
class SensingProblem:
    """Per-agent measurement matrices and targets for l1-regularized
    least squares, reproducible from ``seed``."""

    measurement: np.ndarray  # (n_agents, m_i, d)
    targets: np.ndarray      # (n_agents, m_i)
    reg_weight: float
    step: float
    x_true: np.ndarray
    seed: int

    def __post_init__(self):
        for arr in (self.measurement, self.targets, self.x_true):
            arr.setflags(write=False)

    @property
    def n_agents(self) -> int:
        return self.measurement.shape[0]

    @property
    def dim(self) -> int:
        return self.measurement.shape[2]


@dataclass
class PgExtraState:
    x: np.ndarray  # (n_agents, d) per-agent primal
    w: np.ndarray  # (n_agents, d) accumulated disagreement correction
    k: int = 0


def _degrees(n: int, edges) -> np.ndarray:
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    return deg


def _connected(n: int, edges) -> bool:
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return all(seen)


def _metropolis_weights(n: int, edges) -> np.ndarray:
    deg = _degrees(n, edges)
    w = np.zeros((n, n))
    for i, j in edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def make_network(topology: str, n: int, prob: float = 0.5,
                 seed: int = 0, edge_list: Optional[Sequence] = None) -> NetworkGraph:
    """Build a connected graph with Metropolis-Hastings mixing weights
    1 / (1 + max(deg_i, deg_j)) on edges and the complement on the diagonal."""
    if n < 1:
        raise ConfigError(f"need at least one agent, got {n}")
    if topology not in TOPOLOGIES:
        raise ConfigError(f"topology must be one of {TOPOLOGIES}, got {topology!r}")
    if topology == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    elif topology == "ring":
        edges = {(i, (i + 1) % n) for i in range(n)} if n > 2 else \
            {(i, i + 1) for i in range(n - 1)}
        edges = {tuple(sorted(e)) for e in edges}
    elif topology == "explicit":
        if edge_list is None:
            raise ConfigError("explicit topology needs edge_list")
        edges = set()
        for i, j in edge_list:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ConfigError(f"bad edge ({i}, {j}) for {n} agents")
            edges.add(tuple(sorted((int(i), int(j)))))
        if not _connected(n, edges):
            raise DisconnectedGraph("explicit edge list does not connect the graph")
    else:
        rng = np.random.default_rng(seed)
        edges = None
        for _ in range(100):
            draw = {(i, j) for i in range(n) for j in range(i + 1, n)
                    if rng.random() < prob}
            if _connected(n, draw):
                edges = draw
                break
        if edges is None:
            raise DisconnectedGraph(
                f"no connected draw in 100 attempts (n={n}, prob={prob})")
    if topology in ("path", "ring") and n > 1 and not _connected(n, edges):
        raise DisconnectedGraph(f"{topology} graph is not connected")  # pragma: no cover
    return NetworkGraph(n_agents=n, edges=frozenset(edges),
                        mixing=_metropolis_weights(n, edges))


def gen_problem(seed: int, d: int = 100, n: int = 20, m_i: int = 4,
                noise_sigma: float = 0.01, sparsity: float = 0.1,
                reg_weight: float = 0.01, step: float = 0.01) -> SensingProblem:
    """Gaussian measurement matrices (scaled by 1/sqrt(m_i)), a sparse
    Gaussian ground truth, and Gaussian measurement noise, all drawn from
    ``seed``."""
    if min(d, n, m_i) < 1:
        raise ConfigError(f"d, n, m_i must all be >= 1, got {d}, {n}, {m_i}")
    if not 0.0 <= sparsity <= 1.0:
        raise ConfigError(f"sparsity must lie in [0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    measurement = rng.standard_normal((n, m_i, d)) / np.sqrt(m_i)
    x_true = np.zeros(d)
    n_nonzero = int(np.ceil(sparsity * d))
    if n_nonzero > 0:
        support = rng.choice(d, size=n_nonzero, replace=False)
        x_true[support] = rng.standard_normal(n_nonzero)
    noise = noise_sigma * rng.standard_normal((n, m_i))
    targets = np.einsum("nmd,d->nm", measurement, x_true) + noise
    return SensingProblem(measurement=measurement, targets=targets,
                          reg_weight=reg_weight, step=step, x_true=x_true, seed=seed)


def initial_state(problem: SensingProblem, x0: Optional[np.ndarray] = None) -> PgExtraState:
    n, d = problem.n_agents, problem.dim
    x = np.zeros((n, d)) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n, d):
        raise DimensionMismatch(f"x0 shape {x.shape} != ({n}, {d})")
    return PgExtraState(x=x, w=np.zeros((n, d)), k=0)


def _local_gradients(problem: SensingProblem, x: np.ndarray) -> np.ndarray:
    resid = np.einsum("nmd,nd->nm", problem.measurement, x) - problem.targets
    return np.einsum("nmd,nm->nd", problem.measurement, resid)


def pg_extra_step(state: PgExtraState, problem: SensingProblem,
                  graph: NetworkGraph) -> PgExtraState:
    """One proximal-gradient consensus update.

    x+ = prox(mix(x) - step * grad(x) - w) with an l1 prox at threshold
    step * reg_weight, and w+ = w + (x - mix(x)) / 2.  With w0 = 0 the
    first step is the standard bootstrap (no correction yet).
    """
    alpha = problem.step
    mixed = graph.mixing @ state.x
    grads = _local_gradients(problem, state.x)
    x_next = soft_threshold(mixed - alpha * grads - state.w,
                            alpha * problem.reg_weight)
    w_next = state.w + 0.5 * (state.x - mixed)
    return PgExtraState(x=x_next, w=w_next, k=state.k + 1)


@dataclass(frozen=True)
class FixedPointMap:
    """The stacked-state view z = (x, w) of the consensus update, with the
    metric in which the map is half-averaged."""

    problem: SensingProblem
    graph: NetworkGraph
    metric_sqrt: np.ndarray       # U with U^2 = (I - W) / 2
    metric_sqrt_pinv: np.ndarray

    def __call__(self, state: PgExtraState) -> PgExtraState:
        return pg_extra_step(state, self.problem, self.graph)

    def m_inner(self, ax: np.ndarray, aw: np.ndarray,
                bx: np.ndarray, bw: np.ndarray) -> float:
        """Metric inner product of stacked pairs (ax, aw), (bx, bw); the w
        parts must lie in the range of (I - W) / 2, which holds for iterates
        started from w = 0 and their differences."""
        alpha = self.problem.step
        au = self.metric_sqrt_pinv @ aw / alpha
        bu = self.metric_sqrt_pinv @ bw / alpha
        return float((ax * bx).sum() / alpha
                     + (au * (self.metric_sqrt @ bx)).sum()
                     + (bu * (self.metric_sqrt @ ax)).sum()
                     + alpha * (au * bu).sum())

    def m_norm_sq(self, dx: np.ndarray, dw: np.ndarray) -> float:
        """Squared metric norm of a stacked difference (dx, dw)."""
        return self.m_inner(dx, dw, dx, dw)

    def residual_sq(self, state: PgExtraState, metric: bool = False) -> float:
        nxt = self(state)
        dx = state.x - nxt.x
        dw = state.w - nxt.w
        if metric:
            return self.m_norm_sq(dx, dw)
        return float((dx * dx).sum() + (dw * dw).sum())


def as_fixed_point_operator(problem: SensingProblem, graph: NetworkGraph) -> FixedPointMap:
    """Wrap the consensus update as a map on the stacked (x, w) state.

    Requires the step below the averagedness threshold
    2 lambda_min((I + W) / 2) / max_i ||A_i^T A_i||.
    """
    if problem.n_agents != graph.n_agents:
        raise DimensionMismatch(
            f"problem has {problem.n_agents} agents, graph has {graph.n_agents}")
    w_eigs = np.linalg.eigvalsh(graph.mixing)
    lam_min_avg = (1.0 + w_eigs.min()) / 2.0
    l_max = max(float(np.linalg.norm(a.T @ a, 2)) for a in problem.measurement)
    limit = 2.0 * lam_min_avg / l_max if l_max > 0 else np.inf
    if problem.step >= limit:
        raise StepSizeTooLarge(
            f"step {problem.step} >= stability bound {limit:.4g}")
    half = 0.5 * (np.eye(graph.n_agents) - graph.mixing)
    eigvals, eigvecs = np.linalg.eigh(half)
    clipped = np.clip(eigvals, 0.0, None)
    root = eigvecs @ np.diag(np.sqrt(clipped)) @ eigvecs.T
    inv_root = eigvecs @ np.diag(
        [1.0 / np.sqrt(v) if v > 1e-12 else 0.0 for v in clipped]) @ eigvecs.T
    return FixedPointMap(problem=problem, graph=graph,
                         metric_sqrt=root, metric_sqrt_pinv=inv_root)


@dataclass(frozen=True)
class AnchoredRun:
    """Residual series of an anchored (or vanilla) consensus run."""

    ks: np.ndarray
    resid_sq: np.ndarray
    resid_sq_metric: np.ndarray
    betas: np.ndarray
    final_state: PgExtraState = field(repr=False, default=None)

    def __post_init__(self):
        for arr in (self.ks, self.resid_sq, self.resid_sq_metric, self.betas):
            arr.setflags(write=False)


def _adaptive_metric_weight(fp: FixedPointMap, dx, dw, img_x, img_w) -> float:
    """Adaptive anchor weight with the inner products taken in the metric
    where the consensus map is half-averaged; this is what makes the
    1/(k+1) weight envelope carry over from the resolvent setting."""
    resid_sq = fp.m_inner(dx, dw, dx, dw)
    if resid_sq <= sched.ZERO_RESIDUAL_SQ:
        return 0.0
    denom = -fp.m_inner(dx, dw, img_x, img_w) + resid_sq
    if denom <= 0.0:
        raise NonpositiveDenominator(
            f"adaptive consensus weight denominator {denom:.3e} <= 0")
    return resid_sq / denom


def run_anchored_pgextra(problem: SensingProblem, graph: NetworkGraph,
                         anchor: Optional[sched.AnchorSchedule], n_iter: int,
                         x0: Optional[np.ndarray] = None) -> AnchoredRun:
    """Consensus iteration with optional anchoring toward the start z^0.

    Vanilla runs (``anchor`` None) iterate z^{k+1} = T(z^k).  Anchored runs
    act through the reflected image of the half-averaged map, mirroring how
    anchored resolvent methods combine 2x^k - y^{k-1} with the anchor:

        z^{k+1} = (1 - beta_k) (2 T(z^k) - z^k) + beta_k z^0,

    with beta_k = gamma / (k^p + gamma) for a power-law anchor, or the
    adaptive weight computed from the residual z^k - T(z^k) and image
    T(z^k) in the metric inner product.  Both the Euclidean and metric
    squared residuals |z^k - T(z^k)|^2 are recorded at every iteration.
    """
    if n_iter < 1:
        raise ConfigError(f"need n_iter >= 1, got {n_iter}")
    if anchor is not None and anchor.family == sched.NONE:
        anchor = None
    if anchor is not None and anchor.family == sched.STRONGLY_MONOTONE:
        raise ConfigError("consensus anchoring supports power-law, adaptive, or none")
    fp = as_fixed_point_operator(problem, graph)
    state = initial_state(problem, x0)
    z0_x, z0_w = state.x.copy(), state.w.copy()

    ks = np.arange(1, n_iter + 1)
    resid_sq = np.empty(n_iter)
    resid_sq_metric = np.empty(n_iter)
    betas = np.empty(n_iter)
    for idx, k in enumerate(ks):
        nxt = fp(state)
        dx = state.x - nxt.x
        dw = state.w - nxt.w
        resid_sq[idx] = float((dx * dx).sum() + (dw * dw).sum())
        resid_sq_metric[idx] = fp.m_norm_sq(dx, dw)
        if anchor is None:
            betas[idx] = 0.0
            state = PgExtraState(x=nxt.x, w=nxt.w, k=int(k))
            continue
        if anchor.family == sched.POWER_LAW:
            beta = anchor.gamma / (float(k) ** anchor.p + anchor.gamma)
        else:
            beta = _adaptive_metric_weight(fp, dx, dw, nxt.x - z0_x, nxt.w - z0_w)
        betas[idx] = beta
        state = PgExtraState(
            x=(1.0 - beta) * (2.0 * nxt.x - state.x) + beta * z0_x,
            w=(1.0 - beta) * (2.0 * nxt.w - state.w) + beta * z0_w,
            k=int(k))
    return AnchoredRun(ks=ks, resid_sq=resid_sq, resid_sq_metric=resid_sq_metric,
                       betas=betas, final_state=state)


def consensus_gap(state: PgExtraState) -> float:
    """max_i |x_i - mean(x)|, the disagreement across agents."""
    mean = state.x.mean(axis=0)
    return float(np.max(np.linalg.norm(state.x - mean, axis=1)))


def stacked_least_squares(problem: SensingProblem) -> np.ndarray:
    """Least-squares solution of all measurements stacked; the consensus
    optimum for zero regularization."""
    a = problem.measurement.reshape(-1, problem.dim)
    b = problem.targets.reshape(-1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol
