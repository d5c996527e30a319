"""Memory-product graph with auxiliary wait vertices.

Standard augmented nodes are pairs (base node, memory state), flattened to
ids ``base * memory_size + memory`` in ``0 .. n_standard - 1``.  Every
prolongable base pair (u, v) is represented, for each ordered pair of
standard nodes over it, by a unique wait vertex w with edges
``u -> w`` (length time(u, v)), ``w -> w`` (length 1) and ``w -> v``
(length 0); the direct edge is absent for prolongable pairs.  Iterating the
self-loop on w before exiting realises an integer wait.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ServiceSpec

__all__ = [
    "AugmentedNode",
    "AugmentedGraph",
    "build_augmented_graph",
    "successors",
    "node_info",
    "standard_id",
]


@dataclass(frozen=True)
class AugmentedNode:
    """Introspection view of one augmented node."""

    kind: str  # "standard" or "wait"
    base: int = -1
    memory: int = -1
    edge: tuple = ()  # for wait nodes: (source standard id, target standard id)


@dataclass(frozen=True, eq=False)
class AugmentedGraph:
    spec: ServiceSpec
    memory_size: int
    n_base: int
    n_standard: int
    n_nodes: int
    n_edges: int
    # CSR successor structure, per-node slices sorted by target id.
    indptr: np.ndarray
    targets: np.ndarray
    lengths: np.ndarray
    # Node attributes (-1 where not applicable).
    base_of: np.ndarray
    mem_of: np.ndarray
    wait_exit: np.ndarray
    wait_entry: np.ndarray
    # Edge attributes: the standard node a move ultimately leads to, and the
    # wait vertex it is routed through (-1 for direct edges).
    edge_resolved: np.ndarray
    edge_wait: np.ndarray

    def is_wait(self, n: int) -> bool:
        return n >= self.n_standard

    def is_standard(self, n: int) -> bool:
        return 0 <= n < self.n_standard

    def out_slice(self, n: int) -> slice:
        return slice(int(self.indptr[n]), int(self.indptr[n + 1]))

    def out_degree(self, n: int) -> int:
        return int(self.indptr[n + 1] - self.indptr[n])


def standard_id(g: AugmentedGraph, base: int, memory: int) -> int:
    """Flat id of the standard augmented node (base, memory)."""
    if not (0 <= base < g.n_base and 0 <= memory < g.memory_size):
        raise ValueError(f"no standard node ({base}, {memory})")
    return base * g.memory_size + memory


def node_info(g: AugmentedGraph, n: int) -> AugmentedNode:
    if not (0 <= n < g.n_nodes):
        raise ValueError(f"invalid node id {n}")
    if n < g.n_standard:
        return AugmentedNode(kind="standard", base=int(g.base_of[n]),
                             memory=int(g.mem_of[n]))
    return AugmentedNode(kind="wait",
                         edge=(int(g.wait_entry[n]), int(g.wait_exit[n])))


def build_augmented_graph(spec: ServiceSpec, memory_size: int) -> AugmentedGraph:
    """Construct the memory-product graph for a validated specification.

    From each standard node there is exactly one outgoing choice per target
    standard node, routed through a wait vertex iff the underlying base pair
    is prolongable.  Wait vertices have exactly two outgoing edges: the exit
    (length 0) and the self-loop (length 1).
    """
    if memory_size < 1:
        raise ValueError(f"memory_size must be >= 1, got {memory_size}")
    n = spec.node_count
    m = memory_size
    ns = n * m
    prolong = spec.prolongable

    # Wait vertices, one per ordered standard pair over a prolongable base
    # pair, numbered after the standard block in (source, target) order.
    wait_id = {}
    for su in range(ns):
        bu = su // m
        for sv in range(ns):
            bv = sv // m
            if (bu, bv) in prolong:
                wait_id[(su, sv)] = ns + len(wait_id)
    nw = len(wait_id)
    n_nodes = ns + nw

    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    tgt_rows, len_rows, res_rows, wait_rows = [], [], [], []
    for su in range(ns):
        bu = su // m
        row = []
        for sv in range(ns):
            bv = sv // m
            t = int(spec.time[bu, bv])
            w = wait_id.get((su, sv), -1)
            if w >= 0:
                row.append((w, t, sv, w))
            else:
                row.append((sv, t, sv, -1))
        row.sort(key=lambda e: e[0])
        tgt_rows.append([e[0] for e in row])
        len_rows.append([e[1] for e in row])
        res_rows.append([e[2] for e in row])
        wait_rows.append([e[3] for e in row])
        indptr[su + 1] = indptr[su] + len(row)

    wait_exit = np.full(n_nodes, -1, dtype=np.int64)
    wait_entry = np.full(n_nodes, -1, dtype=np.int64)
    for (su, sv), w in wait_id.items():
        wait_entry[w] = su
        wait_exit[w] = sv
    for w in range(ns, n_nodes):
        sv = int(wait_exit[w])
        # exit target id is always below the wait block, so this is sorted
        tgt_rows.append([sv, w])
        len_rows.append([0, 1])
        res_rows.append([sv, w])
        wait_rows.append([-1, -1])
        indptr[w + 1] = indptr[w] + 2

    targets = np.array([t for row in tgt_rows for t in row], dtype=np.int64)
    lengths = np.array([t for row in len_rows for t in row], dtype=np.int64)
    edge_resolved = np.array([t for row in res_rows for t in row], dtype=np.int64)
    edge_wait = np.array([t for row in wait_rows for t in row], dtype=np.int64)

    base_of = np.full(n_nodes, -1, dtype=np.int64)
    mem_of = np.full(n_nodes, -1, dtype=np.int64)
    base_of[:ns] = np.arange(ns) // m
    mem_of[:ns] = np.arange(ns) % m

    return AugmentedGraph(
        spec=spec,
        memory_size=m,
        n_base=n,
        n_standard=ns,
        n_nodes=n_nodes,
        n_edges=int(targets.size),
        indptr=indptr,
        targets=targets,
        lengths=lengths,
        base_of=base_of,
        mem_of=mem_of,
        wait_exit=wait_exit,
        wait_entry=wait_entry,
        edge_resolved=edge_resolved,
        edge_wait=edge_wait,
    )


def successors(g: AugmentedGraph, n: int) -> list:
    """Successor list of node ``n`` as (target id, length) pairs.

    The ordering is deterministic (sorted by target id) and is shared by
    sampling, evaluation and strategy parameter layout.
    """
    if not (0 <= n < g.n_nodes):
        raise ValueError(f"invalid node id {n}")
    sl = g.out_slice(n)
    return list(zip(g.targets[sl].tolist(), g.lengths[sl].tolist()))
