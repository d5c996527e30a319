"""Strategy evaluation: ergodic value of a randomized finite-memory strategy.

The strategy-induced Markov chain over augmented nodes is decomposed into
strongly connected components; every bottom component defines an ergodic
schedule whose mean payoff combines the invariant distribution, the mean
edge-traverse time, and the expected payoff collected per return to each
base node.  Payoffs are handled in de-affinized form (eventually constant),
which turns the infinite return-payoff sums into a bounded-horizon
first-passage computation plus a tail term; the constant slope sum over
compulsory nodes is added back at the end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .graph import AugmentedGraph
from .model import (DeaffinizedSpec, PayoffFunction, ServiceSpec, deaffinize,
                    payoff_at)
from .strategy import RfmStrategy

__all__ = [
    "BsccDecomposition",
    "BsccAnalysis",
    "FirstPassage",
    "StrategyValue",
    "bscc_decompose",
    "invariant_distribution",
    "visit_rates",
    "first_passage_distribution",
    "node_return_payoff",
    "strategy_value",
    "simulate_mean_payoff",
]

STATIONARITY_TOL = 1e-10
CONSERVATION_TOL = 1e-9


@dataclass
class BsccDecomposition:
    """SCCs of the positive-probability transition graph.

    Components are listed in a deterministic order (ascending smallest node
    id); ``bottom_flags[i]`` is True iff no positive-probability edge leaves
    ``sccs[i]``.
    """

    sccs: list
    bottom_flags: list

    def bottom_indices(self) -> list:
        return [i for i, f in enumerate(self.bottom_flags) if f]


def bscc_decompose(strategy: RfmStrategy, g: AugmentedGraph,
                   eps_prob: float = 0.0) -> BsccDecomposition:
    """Tarjan decomposition of the digraph of edges with probability > eps."""
    n = g.n_nodes
    indptr, targets, probs = g.indptr, g.targets, strategy.probs
    index = np.full(n, -1, dtype=np.int64)
    lowlink = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    comp_of = np.full(n, -1, dtype=np.int64)
    stack = []
    sccs = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, int(indptr[root]))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, ptr = work[-1]
            advanced = False
            while ptr < indptr[v + 1]:
                if probs[ptr] <= eps_prob:
                    ptr += 1
                    continue
                w = int(targets[ptr])
                ptr += 1
                if index[w] == -1:
                    work[-1] = (v, ptr)
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, int(indptr[w])))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                lowlink[u] = min(lowlink[u], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp_of[w] = len(sccs)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(np.array(sorted(comp), dtype=np.int64))

    order = sorted(range(len(sccs)), key=lambda i: int(sccs[i][0]))
    remap = {old: new for new, old in enumerate(order)}
    comp_of = np.array([remap[c] for c in comp_of], dtype=np.int64)
    sccs = [sccs[i] for i in order]
    bottom = [True] * len(sccs)
    edge_src = np.repeat(np.arange(n), np.diff(indptr))
    live = probs > eps_prob
    for s, t in zip(edge_src[live], targets[live]):
        if comp_of[s] != comp_of[t]:
            bottom[comp_of[s]] = False
    return BsccDecomposition(sccs=sccs, bottom_flags=bottom)


@dataclass
class LocalChain:
    """A bottom SCC renumbered to local indices with its positive edges."""

    nodes: np.ndarray
    indptr: np.ndarray
    targets: np.ndarray
    lengths: np.ndarray
    probs: np.ndarray
    edge_src: np.ndarray
    edge_global: np.ndarray
    is_wait: np.ndarray
    base_of: np.ndarray


def build_local_chain(strategy: RfmStrategy, g: AugmentedGraph,
                      nodes) -> LocalChain:
    nodes = np.array(sorted(int(v) for v in nodes), dtype=np.int64)
    loc = np.full(g.n_nodes, -1, dtype=np.int64)
    loc[nodes] = np.arange(len(nodes))
    indptr = [0]
    targets, lengths, probs, esrc, eglob = [], [], [], [], []
    for li, v in enumerate(nodes):
        for e in range(int(g.indptr[v]), int(g.indptr[v + 1])):
            p = strategy.probs[e]
            if p <= 0.0:
                continue
            t = int(g.targets[e])
            if loc[t] < 0:
                raise ValueError(
                    f"positive-probability edge leaves the component: {v} -> {t}")
            targets.append(int(loc[t]))
            lengths.append(int(g.lengths[e]))
            probs.append(float(p))
            esrc.append(li)
            eglob.append(e)
        indptr.append(len(targets))
    return LocalChain(
        nodes=nodes,
        indptr=np.array(indptr, dtype=np.int64),
        targets=np.array(targets, dtype=np.int64),
        lengths=np.array(lengths, dtype=np.int64),
        probs=np.array(probs, dtype=np.float64),
        edge_src=np.array(esrc, dtype=np.int64),
        edge_global=np.array(eglob, dtype=np.int64),
        is_wait=(nodes >= g.n_standard).astype(np.uint8),
        base_of=g.base_of[nodes].copy(),
    )


def _stationary(chain: LocalChain):
    """Solve the stationarity system with the normalization row.

    Row 0 of the dense system is replaced by the constraint sum(x) = 1; one
    step of iterative refinement is applied when the stationarity residual
    exceeds the tolerance.  Returns (x, residual, lu_factorization, M).
    """
    nb = len(chain.nodes)
    P = np.zeros((nb, nb))
    np.add.at(P, (chain.edge_src, chain.targets), chain.probs)
    M = np.eye(nb) - P.T
    M[0, :] = 1.0
    rhs = np.zeros(nb)
    rhs[0] = 1.0
    lu = scipy.linalg.lu_factor(M)
    x = scipy.linalg.lu_solve(lu, rhs)

    def residual_of(vec):
        return float(np.abs(vec @ P - vec).max())

    res = residual_of(x)
    if res > STATIONARITY_TOL:
        x = x + scipy.linalg.lu_solve(lu, rhs - M @ x)
        res = residual_of(x)
    if x.min() < -1e-9:
        raise np.linalg.LinAlgError(
            f"stationary solve produced negative mass ({x.min():.3e}); "
            "the component is not a genuine bottom SCC")
    x = np.maximum(x, 0.0)
    x = x / x.sum()
    res = residual_of(x)
    return x, res, lu, P


def invariant_distribution(strategy: RfmStrategy, g: AugmentedGraph,
                           nodes) -> np.ndarray:
    """Invariant distribution of a bottom SCC, indexed by ascending node id."""
    chain = build_local_chain(strategy, g, nodes)
    x, _, _, _ = _stationary(chain)
    return x


def visit_rates(x: np.ndarray, strategy: RfmStrategy, g: AugmentedGraph,
                nodes):
    """Edge occupation h, mean edge-traverse time T and visit rates I = x/T."""
    chain = build_local_chain(strategy, g, nodes)
    return _visit_rates(chain, x)


def _visit_rates(chain: LocalChain, x: np.ndarray):
    h = x[chain.edge_src] * chain.probs
    T = float(h @ chain.lengths)
    if T <= 0.0:
        raise ValueError("mean traverse time must be positive")
    return h, T, x / T


@dataclass
class FirstPassage:
    """Distribution of the first arrival time at a base node.

    ``probs[t]`` is the probability that the walk started at ``source``
    first visits any standard node over the target base node after exactly
    ``t`` time units, for ``t = 1 .. horizon`` (index 0 is unused);
    ``tail`` collects the remaining mass (arrivals after the horizon).
    """

    source: int
    horizon: int
    probs: np.ndarray
    tail: float


def _absorbing_mask(chain: LocalChain, base: int) -> np.ndarray:
    return ((chain.base_of == base) & (chain.is_wait == 0)).astype(np.uint8)


def _first_passage_batch(chain: LocalChain, base: int, sources_local,
                         horizon: int, store_history: bool = False):
    absorbing = _absorbing_mask(chain, base)
    return _kernels.fp_forward(
        chain.indptr, chain.targets, chain.lengths, chain.probs,
        chain.is_wait, absorbing,
        np.asarray(sources_local, dtype=np.int64), int(horizon),
        store_history)


def first_passage_distribution(strategy: RfmStrategy, g: AugmentedGraph,
                               source: int, horizon: int,
                               chain: LocalChain = None) -> FirstPassage:
    """Exact first-arrival-time distribution up to ``horizon`` time units."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not g.is_standard(source):
        raise ValueError(f"source {source} is not a standard augmented node")
    if chain is None:
        decomp = bscc_decompose(strategy, g)
        home = None
        for i in decomp.bottom_indices():
            if source in decomp.sccs[i]:
                home = decomp.sccs[i]
                break
        if home is None:
            raise ValueError(f"source {source} is not in a bottom SCC")
        chain = build_local_chain(strategy, g, home)
    loc = int(np.searchsorted(chain.nodes, source))
    if loc >= len(chain.nodes) or chain.nodes[loc] != source:
        raise ValueError(f"source {source} is not part of the component")
    absorbed, _ = _first_passage_batch(
        chain, int(g.base_of[source]), [loc], horizon)
    probs = absorbed[:, 0].copy()
    tail = 1.0 - float(probs.sum())
    if tail < -CONSERVATION_TOL:
        raise FloatingPointError(
            f"first-passage mass exceeds 1 by {-tail:.3e}")
    return FirstPassage(source=int(source), horizon=int(horizon), probs=probs,
                        tail=max(tail, 0.0))


def node_return_payoff(fp: FirstPassage, q: PayoffFunction) -> float:
    """Expected payoff collected at the next return, under an eventually
    constant payoff function."""
    if q.c != 0.0:
        raise ValueError("payoff must be eventually constant (slope removed)")
    if fp.horizon != q.k - 1:
        raise ValueError(
            f"first-passage horizon {fp.horizon} does not match k-1 = {q.k - 1}")
    finite = float(fp.probs[1:] @ q.table(q.k - 1)) if q.k > 1 else 0.0
    return finite + fp.tail * payoff_at(q, q.k)


@dataclass
class BsccAnalysis:
    """Everything the value of one bottom SCC is made of."""

    chain: LocalChain
    x: np.ndarray
    residual: float
    lu: object
    P: np.ndarray
    h: np.ndarray
    T: float
    I: np.ndarray
    S: dict              # global standard node id -> expected return payoff
    S_local: np.ndarray  # aligned with chain-local standard node order
    std_local: np.ndarray
    mp: float
    conservation: float


@dataclass
class StrategyValue:
    value: float
    best_index: int
    analyses: list
    decomposition: BsccDecomposition


def _analyze_bscc(strategy: RfmStrategy, g: AugmentedGraph,
                  dspec: DeaffinizedSpec, nodes) -> BsccAnalysis:
    chain = build_local_chain(strategy, g, nodes)
    x, residual, lu, P = _stationary(chain)
    h, T, I = _visit_rates(chain, x)

    std_local = np.nonzero(chain.is_wait == 0)[0].astype(np.int64)
    S_local = np.zeros(len(std_local))
    conservation = 0.0
    pos_of = {int(l): i for i, l in enumerate(std_local)}
    for base in sorted(set(int(chain.base_of[l]) for l in std_local)):
        locs = [int(l) for l in std_local if chain.base_of[l] == base]
        q = dspec.base.payoffs[base]
        if q.k == 1:
            for l in locs:
                S_local[pos_of[l]] = q.d
            continue
        absorbed, _ = _first_passage_batch(chain, base, locs, q.k - 1)
        qtab = q.table(q.k - 1)
        for j, l in enumerate(locs):
            total = float(absorbed[1:, j].sum())
            tail = 1.0 - total
            conservation = max(conservation, max(0.0, -tail))
            tail = max(tail, 0.0)
            S_local[pos_of[l]] = float(absorbed[1:, j] @ qtab) + tail * q.d
    U = float(x[std_local] @ S_local)
    mp = U / T + dspec.shift
    S = {int(chain.nodes[l]): float(S_local[i]) for i, l in enumerate(std_local)}
    return BsccAnalysis(chain=chain, x=x, residual=residual, lu=lu, P=P, h=h,
                        T=T, I=I, S=S, S_local=S_local, std_local=std_local,
                        mp=mp, conservation=conservation)


def strategy_value(strategy: RfmStrategy, g: AugmentedGraph,
                   spec: ServiceSpec,
                   dspec: DeaffinizedSpec = None) -> StrategyValue:
    """Value of the strategy: the best mean payoff over its bottom SCCs.

    Ties between equal-valued components resolve to the lowest index in the
    deterministic component ordering.
    """
    if dspec is None:
        dspec = deaffinize(spec)
    decomp = bscc_decompose(strategy, g)
    analyses = []
    best_idx = -1
    best = -np.inf
    for i in decomp.bottom_indices():
        analysis = _analyze_bscc(strategy, g, dspec, decomp.sccs[i])
        analyses.append(analysis)
        if analysis.mp > best:
            best = analysis.mp
            best_idx = len(analyses) - 1
    return StrategyValue(value=best, best_index=best_idx, analyses=analyses,
                         decomposition=decomp)


def simulate_mean_payoff(strategy: RfmStrategy, g: AugmentedGraph,
                         spec: ServiceSpec, time_units: int,
                         rng: np.random.Generator, start: int = 0,
                         batches: int = 20):
    """Monte-Carlo estimate of the long-run mean payoff from ``start``.

    Walks until at least ``time_units`` time has elapsed, sums the payoffs
    received at every revisit (original payoffs), adds the per-time-unit
    penalty of compulsory nodes never visited, and reports the estimate with
    a batch-means standard error.
    """
    steps = int(time_units)  # every move takes >= 1 time unit
    rand = rng.random((steps, 2))
    nodes, taus = _kernels.sample_walk(
        g.indptr, strategy.cumprobs, g.edge_resolved, g.edge_wait, g.lengths,
        strategy.wait_loop_prob, int(start), steps, rand)
    cum = np.zeros(steps + 1, dtype=np.int64)
    np.cumsum(taus, out=cum[1:])
    total_time = int(cum[-1])
    bases = g.base_of[nodes]

    edges = np.linspace(0, total_time, batches + 1)
    batch_pay = np.zeros(batches)
    total_pay = 0.0
    visited = set()
    for u in range(g.n_base):
        pos = np.nonzero(bases == u)[0]
        if len(pos) == 0:
            continue
        visited.add(u)
        if len(pos) < 2:
            continue
        times = cum[pos]
        gaps = np.diff(times)
        pays = spec.payoffs[u].values(gaps)
        total_pay += float(pays.sum())
        idx = np.clip(np.searchsorted(edges, times[1:], side="right") - 1,
                      0, batches - 1)
        np.add.at(batch_pay, idx, pays)
    penalty = float(sum(spec.payoffs[u].c for u in sorted(spec.compulsory)
                        if u not in visited))
    estimate = total_pay / total_time + penalty
    widths = np.diff(edges)
    rates = batch_pay / widths + penalty
    stderr = float(rates.std(ddof=1) / np.sqrt(batches))
    return estimate, stderr
