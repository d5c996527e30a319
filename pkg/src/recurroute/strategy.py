"""Randomized finite-memory strategies over the augmented graph.

A strategy assigns every augmented node a probability distribution over its
successor list.  Unconstrained real parameters (one logit per edge) are
mapped to distributions with a per-node softmax; integer waits are realised
by the self-loop probabilities of wait vertices, sampled in closed form from
the implied geometric distribution.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .graph import AugmentedGraph

__all__ = [
    "StrategyParams",
    "RfmStrategy",
    "init_params",
    "softmax_strategy",
    "strategy_from_probs",
    "get_random_successor",
    "sample_wait",
    "checkpoint_payload",
    "params_from_checkpoint",
]


@dataclass
class StrategyParams:
    """Unconstrained parameters: one real logit per graph edge."""

    logits: np.ndarray
    seed: object = None

    def copy(self) -> "StrategyParams":
        return StrategyParams(logits=self.logits.copy(), seed=self.seed)


@dataclass
class RfmStrategy:
    """Per-node successor distributions with sampling scaffolding.

    ``probs`` is flat and aligned with the graph's edge layout; ``cumprobs``
    holds the inclusive prefix sums within each node's slice (the implied
    leading zero is not stored).  ``wait_loop_prob[w]`` caches the self-loop
    probability of each wait vertex.
    """

    probs: np.ndarray
    cumprobs: np.ndarray
    wait_loop_prob: np.ndarray

    def node_probs(self, g: AugmentedGraph, n: int) -> np.ndarray:
        return self.probs[g.out_slice(n)]

    def prefix_sums(self, g: AugmentedGraph, n: int) -> np.ndarray:
        """Cumulative sums with a leading zero, one entry per successor + 1."""
        sl = g.out_slice(n)
        return np.concatenate(([0.0], self.cumprobs[sl]))


def init_params(g: AugmentedGraph, seed=None, lo: float = 1e-3,
                hi: float = 1.0) -> StrategyParams:
    """Draw each logit independently as log of Uniform(lo, hi)."""
    if not (0.0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(seed)
    logits = np.log(rng.uniform(lo, hi, g.n_edges))
    return StrategyParams(logits=logits, seed=seed)


def _finalize(g: AugmentedGraph, probs: np.ndarray) -> RfmStrategy:
    cum = np.empty_like(probs)
    starts = g.indptr[:-1]
    np.cumsum(probs, out=cum)
    # subtract the running total accumulated before each node's slice
    offsets = np.repeat(cum[starts] - probs[starts], np.diff(g.indptr))
    cum -= offsets
    wait_loop = np.zeros(g.n_nodes)
    for w in range(g.n_standard, g.n_nodes):
        sl = g.out_slice(w)
        self_pos = np.nonzero(g.targets[sl] == w)[0]
        wait_loop[w] = probs[sl][self_pos[0]]
    return RfmStrategy(probs=probs, cumprobs=cum, wait_loop_prob=wait_loop)


def softmax_strategy(p: StrategyParams, g: AugmentedGraph) -> RfmStrategy:
    """Per-node softmax of the logits, guarded against overflow."""
    if p.logits.shape != (g.n_edges,):
        raise ValueError(
            f"logits shape {p.logits.shape} does not match {g.n_edges} edges")
    starts = g.indptr[:-1].astype(np.intp)
    counts = np.diff(g.indptr)
    mx = np.maximum.reduceat(p.logits, starts)
    ex = np.exp(p.logits - np.repeat(mx, counts))
    denom = np.add.reduceat(ex, starts)
    probs = ex / np.repeat(denom, counts)
    return _finalize(g, probs)


def strategy_from_probs(g: AugmentedGraph, probs_by_node: dict) -> RfmStrategy:
    """Build a strategy from explicit per-node probability vectors.

    Nodes missing from the mapping get the uniform distribution.  Each
    vector must be nonnegative and sum to 1 within 1e-12.
    """
    probs = np.empty(g.n_edges)
    for n in range(g.n_nodes):
        sl = g.out_slice(n)
        deg = sl.stop - sl.start
        if n in probs_by_node:
            vec = np.asarray(probs_by_node[n], dtype=np.float64)
            if vec.shape != (deg,):
                raise ValueError(
                    f"node {n}: expected {deg} probabilities, got {vec.shape}")
            if vec.min() < 0.0 or abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"node {n}: probabilities must be nonnegative and sum to 1")
            probs[sl] = vec
        else:
            probs[sl] = 1.0 / deg
    return _finalize(g, probs)


def pick_successor_index(strategy: RfmStrategy, g: AugmentedGraph, n: int,
                         r: float) -> int:
    """Least successor index i with prefix_sum(i+1) > r, by binary search."""
    sl = g.out_slice(n)
    cum = strategy.cumprobs[sl]
    i = int(np.searchsorted(cum, r, side="right"))
    deg = sl.stop - sl.start
    if i >= deg:  # guard against the cumulative sum rounding below 1
        i = deg - 1
        while i > 0 and strategy.probs[sl.start + i] == 0.0:
            i -= 1
    return i


def sample_wait(p: float, r: float) -> int:
    """Number of self-loop iterations implied by loop probability ``p``.

    Draws from the geometric law P(delta = j) = p^j (1 - p) using a single
    uniform ``r`` in (0, 1]: delta = floor(ln r / ln p).
    """
    if p >= 1.0:
        raise ValueError(f"wait self-loop probability must be < 1, got {p}")
    if p <= 0.0 or r >= 1.0:
        return 0
    return max(0, int(math.floor(math.log(r) / math.log(p))))


def get_random_successor(strategy: RfmStrategy, g: AugmentedGraph, n: int,
                         rng: np.random.Generator):
    """Sample the next standard node and its wait from a standard node.

    Returns ``(standard node id, delta)``; moves routed through a wait
    vertex resolve to its exit target with a geometrically distributed
    number of self-loops.
    """
    if not g.is_standard(n):
        raise ValueError(f"node {n} is not a standard augmented node")
    r = rng.random()
    e = g.indptr[n] + pick_successor_index(strategy, g, n, r)
    w = int(g.edge_wait[e])
    if w < 0:
        return int(g.edge_resolved[e]), 0
    r2 = 1.0 - rng.random()
    return int(g.edge_resolved[e]), sample_wait(float(strategy.wait_loop_prob[w]), r2)


def graph_digest(instance_json: str, memory_size: int) -> str:
    """Stable identifier for a (instance, memory size) graph construction."""
    h = hashlib.sha256()
    h.update(instance_json.encode())
    h.update(f"|memory={memory_size}".encode())
    return h.hexdigest()[:16]


def checkpoint_payload(params: StrategyParams, g: AugmentedGraph,
                       graph_hash: str) -> dict:
    """Serializable checkpoint: per-node logit arrays plus graph identity."""
    logits = {}
    for n in range(g.n_nodes):
        logits[str(n)] = [float(x) for x in params.logits[g.out_slice(n)]]
    return {
        "memory_size": g.memory_size,
        "graph_hash": graph_hash,
        "logits": logits,
    }


def params_from_checkpoint(payload: dict, g: AugmentedGraph,
                           expected_hash: str = None) -> StrategyParams:
    if expected_hash is not None and payload.get("graph_hash") != expected_hash:
        raise ValueError(
            "checkpoint was built for a different instance/graph "
            f"(hash {payload.get('graph_hash')!r}, expected {expected_hash!r})")
    if int(payload["memory_size"]) != g.memory_size:
        raise ValueError(
            f"checkpoint memory size {payload['memory_size']} does not match "
            f"graph memory size {g.memory_size}")
    logits = np.empty(g.n_edges)
    try:
        for n in range(g.n_nodes):
            sl = g.out_slice(n)
            vec = payload["logits"][str(n)]
            if len(vec) != sl.stop - sl.start:
                raise ValueError(
                    f"node {n}: {len(vec)} logits for {sl.stop - sl.start} successors")
            logits[sl] = vec
    except KeyError as exc:
        raise ValueError(f"checkpoint is missing logits for node {exc}") from exc
    return StrategyParams(logits=logits)


def checkpoint_to_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
