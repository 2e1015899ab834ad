"""Structure learning for the tiered causal graph.

The graph over (meta-prompt, linguistic, metric) variables is learned in two
steps: first the upstream block (M union L, allowing M->L and L->L edges),
then the downstream block (L union C, allowing L->C and C->C), and the two
pruned edge sets are merged.  Because every allowed edge kind moves forward
through the tiers, the union of two acyclic blocks is itself acyclic.

Each block is fit by minimising the least-squares self-regression loss plus
an L1 penalty, subject to a differentiable acyclicity constraint
h(W) = trace(exp(W*W)) - d = 0, via an augmented-Lagrangian outer loop with
L-BFGS-B inner solves.  Disallowed edges are clamped to zero through the
box bounds, and the positive/negative split of each weight keeps the L1
term smooth.  Because long rings of moderate edges can satisfy the
continuous constraint numerically while still being cyclic above the edge
threshold, a deterministic weakest-edge cycle breaker runs before pruning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np
import scipy.linalg as slin
import scipy.optimize as sopt
from scipy import sparse
from scipy.sparse import csgraph

from promptcausal.dataset import ObservationMatrix
from promptcausal.errors import CycleAfterPrune
from promptcausal.graph import CausalGraph, Edge

logger = logging.getLogger(__name__)

__all__ = [
    "DiscoveryConfig",
    "SubgraphResult",
    "acyclicity",
    "learn_subgraph",
    "break_cycles",
    "prune",
    "two_step_discover",
    "rescale_graph",
]


@dataclass(frozen=True)
class DiscoveryConfig:
    lambda_l1: float = 0.1
    edge_threshold: float = 0.3
    max_outer_iters: int = 100
    h_tolerance: float = 1e-8
    rho_max: float = 1e16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.edge_threshold < 0:
            raise ValueError("edge_threshold must be >= 0")
        if self.h_tolerance <= 0:
            raise ValueError("h_tolerance must be > 0")


@dataclass(frozen=True)
class SubgraphResult:
    """Best-effort weighted adjacency with convergence diagnostics."""

    weights: np.ndarray
    converged: bool
    outer_iters: int
    final_h: float


def acyclicity(W: np.ndarray) -> float:
    """h(W) = trace(exp(W*W)) - d; zero exactly on DAG patterns.

    Nonnegative for every real matrix, differentiable everywhere, and zero
    iff the nonzero pattern of W has no directed cycle.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {W.shape}")
    d = W.shape[0]
    return float(np.trace(slin.expm(W * W)) - d)


def learn_subgraph(
    X: np.ndarray,
    mask: np.ndarray,
    config: DiscoveryConfig = DiscoveryConfig(),
) -> SubgraphResult:
    """Fit a weighted adjacency over the columns of X, restricted to ``mask``.

    Minimises (1/2n) ||X - XW||_F^2 + lambda ||W||_1 subject to h(W) <= tol.
    Entries where ``mask`` is False (and the diagonal) are held at exactly
    zero.  Deterministic: the initial point is zero and the inner solver is
    L-BFGS-B, so identical inputs give identical weights.

    Non-convergence is reported, not raised: the result carries the
    best-effort weights with ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    n, d = X.shape
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (d, d):
        raise ValueError(f"mask shape {mask.shape} does not match {d} columns")
    if mask.diagonal().any():
        raise ValueError("mask must be False on the diagonal")
    X = X - X.mean(axis=0, keepdims=True)
    lambda1 = config.lambda_l1

    def _adj(w: np.ndarray) -> np.ndarray:
        return (w[: d * d] - w[d * d :]).reshape(d, d)

    def _func(w: np.ndarray, rho: float, alpha: float):
        W = _adj(w)
        resid = X - X @ W
        loss = 0.5 / n * (resid ** 2).sum()
        grad_loss = -1.0 / n * X.T @ resid
        expw = slin.expm(W * W)
        h = np.trace(expw) - d
        grad_h = expw.T * W * 2
        obj = loss + 0.5 * rho * h * h + alpha * h + lambda1 * w.sum()
        grad_smooth = grad_loss + (rho * h + alpha) * grad_h
        grad = np.concatenate((grad_smooth + lambda1, -grad_smooth + lambda1), axis=None)
        return obj, grad

    free = mask.ravel()
    bounds = [(0.0, 0.0) if not free[i] else (0.0, None) for i in range(d * d)] * 2
    w_est = np.zeros(2 * d * d)
    rho, alpha, h = 1.0, 0.0, np.inf
    outer = 0
    for outer in range(1, config.max_outer_iters + 1):
        w_new, h_new = w_est, h
        while rho < config.rho_max:
            sol = sopt.minimize(
                _func, w_est, args=(rho, alpha), method="L-BFGS-B", jac=True, bounds=bounds
            )
            w_new = sol.x
            h_new = acyclicity(_adj(w_new))
            if h_new > 0.25 * h:
                rho *= 10
            else:
                break
        w_est, h = w_new, h_new
        alpha += rho * h
        if h <= config.h_tolerance or rho >= config.rho_max:
            break
    W = _adj(w_est)
    converged = h <= config.h_tolerance
    if not converged:
        logger.warning(
            "subgraph fit did not reach h <= %.1e after %d outer iterations (h=%.3e)",
            config.h_tolerance,
            outer,
            h,
        )
    return SubgraphResult(weights=W, converged=converged, outer_iters=outer, final_h=float(h))


def _pattern_is_dag(edges: Sequence[Tuple[int, int]], d: int) -> bool:
    indegree = [0] * d
    children: List[List[int]] = [[] for _ in range(d)]
    for src, dst in edges:
        indegree[dst] += 1
        children[src].append(dst)
    ready = [i for i in range(d) if indegree[i] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    return seen == d


def prune(W: np.ndarray, threshold: float) -> List[Tuple[int, int, float]]:
    """Keep edges with |weight| > threshold; the survivors must form a DAG.

    Returns (src_index, dst_index, weight) triples in row-major order.
    Raises :class:`CycleAfterPrune` if thresholding somehow left a cycle --
    impossible for a converged fit, hence treated as an internal error.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    W = np.asarray(W, dtype=float)
    d = W.shape[0]
    edges = [
        (i, j, float(W[i, j]))
        for i in range(d)
        for j in range(d)
        if i != j and abs(W[i, j]) > threshold
    ]
    if not _pattern_is_dag([(i, j) for i, j, _ in edges], d):
        raise CycleAfterPrune(
            f"pruning at threshold {threshold} left a cyclic pattern"
        )
    return edges


def break_cycles(W: np.ndarray, threshold: float) -> np.ndarray:
    """Zero the weakest cycle-participating edge until the thresholded
    pattern is acyclic.

    The continuous constraint h(W) <= tol does not certify acyclicity *at
    the threshold level*: a long ring of moderate edges contributes only
    (product of squared weights) / k! to h, which can sit below any usable
    tolerance while every edge clears the threshold.  Near-collinear
    columns produce exactly such rings.  An edge lies on a cycle iff both
    endpoints share a strongly connected component, so we repeatedly drop
    the smallest such |weight| (ties broken row-major) -- a deterministic
    greedy feedback-edge removal.
    """
    W = np.array(W, dtype=float)
    d = W.shape[0]
    while True:
        pattern = np.abs(W) > threshold
        np.fill_diagonal(pattern, False)
        n_comp, labels = csgraph.connected_components(
            sparse.csr_matrix(pattern), directed=True, connection="strong"
        )
        if n_comp == d:
            return W
        weakest = None
        for i in range(d):
            for j in range(d):
                if pattern[i, j] and labels[i] == labels[j]:
                    if weakest is None or abs(W[i, j]) < abs(W[weakest]):
                        weakest = (i, j)
        if weakest is None:  # cycles were self-loops only; cannot happen
            return W
        logger.info(
            "breaking cycle: dropping edge %d->%d (weight %.4f)",
            weakest[0],
            weakest[1],
            W[weakest],
        )
        W[weakest] = 0.0


def _tier_mask(tiers: Sequence[str], allowed: Set[Tuple[str, str]]) -> np.ndarray:
    d = len(tiers)
    mask = np.zeros((d, d), dtype=bool)
    for i in range(d):
        for j in range(d):
            if i != j and (tiers[i], tiers[j]) in allowed:
                mask[i, j] = True
    return mask


def two_step_discover(
    m: ObservationMatrix,
    config: DiscoveryConfig = DiscoveryConfig(),
) -> CausalGraph:
    """Learn the full tiered DAG from a standardized observation matrix.

    Step 1 fits the (M, L) block allowing M->L and L->L edges; step 2 fits
    the (L, C) block allowing L->C and C->C.  Pruned edges are merged by
    name and nodes that end up with no edges are dropped.  Columns flagged
    constant never enter either fit.
    """
    if m.scaling is None:
        raise ValueError("matrix must be standardized before discovery")
    schema = m.schema
    meta = [n for n in schema.meta_names if n not in m.constant]
    ling = [n for n in schema.ling_names if n not in m.constant]
    metric = [n for n in schema.metric_names if n not in m.constant]
    if not meta or not ling or not metric:
        raise ValueError("discovery needs non-constant variables in all three tiers")

    def block(names: List[str], allowed: Set[Tuple[str, str]]):
        X = np.column_stack([m.column(n) for n in names])
        tiers = [schema.tier_of(n) for n in names]
        result = learn_subgraph(X, _tier_mask(tiers, allowed), config)
        weights = break_cycles(result.weights, config.edge_threshold)
        kept = prune(weights, config.edge_threshold)
        return [(names[i], names[j], w) for i, j, w in kept], result

    upstream_edges, up_res = block(meta + ling, {("M", "L"), ("L", "L")})
    downstream_edges, down_res = block(ling + metric, {("L", "C"), ("C", "C")})
    if not up_res.converged or not down_res.converged:
        logger.warning(
            "discovery finished with non-converged step(s): upstream=%s downstream=%s",
            up_res.converged,
            down_res.converged,
        )

    edges = tuple(
        Edge(src, dst, w) for src, dst, w in upstream_edges + downstream_edges
    )
    connected = {e.src for e in edges} | {e.dst for e in edges}
    nodes = tuple(n for n in schema.all_names() if n in connected)
    tiers = {n: schema.tier_of(n) for n in nodes}
    return CausalGraph(nodes=nodes, tiers=tiers, edges=edges)


def rescale_graph(graph: CausalGraph, m: ObservationMatrix) -> CausalGraph:
    """Convert edge weights from standardized to raw variable units.

    An edge src->dst learned on z-scored columns corresponds to a raw-unit
    coefficient w * std(dst) / std(src).  Columns without scaling info
    (binary meta variables) use std 1.
    """
    if m.scaling is None:
        return graph

    def std_of(name: str) -> float:
        return m.scaling.get(name, (0.0, 1.0))[1]

    edges = tuple(
        Edge(e.src, e.dst, e.weight * std_of(e.dst) / std_of(e.src)) for e in graph.edges
    )
    return CausalGraph(nodes=graph.nodes, tiers=graph.tiers, edges=edges)
