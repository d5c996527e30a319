"""Pure-python/numpy fallback for the hot kernels.

The compiled extension in ``_speedups.pyx`` implements the same four entry
points with identical semantics; tests assert the two backends agree.  The
fallback favours clarity over speed and is fast enough for the test suite.

Kernel conventions
------------------
First-passage mass propagation works in integer time ticks.  Per tick, in
this order: (1) mass arriving directly at absorbing standard nodes is
absorbed, (2) wait-vertex arrivals push their self-loop share one tick ahead
and their exit share into the *same* tick (absorbing it if the exit target
is absorbing), (3) the remaining standard mass propagates along its edges,
all of which have positive length.  There are no zero-length cycles, so one
same-tick relaxation suffices.
"""
from __future__ import annotations

import math

import numpy as np


def _edge_groups(indptr, targets, lengths, is_wait, n):
    """Split edges into wait exits / wait loops-and-pushes / standard, grouped
    by length for ring-buffer scatter."""
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    wait_src = is_wait[src]
    w_zero = wait_src & (lengths == 0)
    w_pos = wait_src & (lengths > 0)
    s_pos = ~wait_src
    return src, w_zero, w_pos, s_pos


def fp_forward(indptr, targets, lengths, probs, is_wait, absorbing, sources,
               horizon, store_history):
    """Propagate unit mass from each source; bucket first arrivals at
    absorbing nodes per tick.

    Returns ``(absorbed, hist)`` where ``absorbed[t, j]`` is the probability
    that the walk from ``sources[j]`` first reaches an absorbing node after
    exactly ``t`` time units, for ``t = 1 .. horizon``.  ``hist`` (kept only
    when requested) stores, per tick, the propagated standard mass and raw
    wait arrivals needed by the reverse sweep.
    """
    n = len(indptr) - 1
    nsrc = len(sources)
    is_wait = np.asarray(is_wait, dtype=bool)
    absorbing = np.asarray(absorbing, dtype=bool)
    src, w_zero, w_pos, s_pos = _edge_groups(indptr, targets, lengths, is_wait, n)
    maxlen = int(lengths.max()) if len(lengths) else 1
    ring_depth = maxlen + 1
    ring = np.zeros((ring_depth, n, nsrc))
    absorbed = np.zeros((horizon + 1, nsrc))
    hist = np.zeros((horizon + 1, n, nsrc)) if store_history else None

    std_abs = (~is_wait) & absorbing
    std_nonabs = (~is_wait) & ~absorbing

    w_zero_abs = w_zero & absorbing[targets]
    w_zero_std = w_zero & ~absorbing[targets]

    # tick 0: unit mass at each source propagates along its edges
    s0 = np.zeros((n, nsrc))
    s0[sources, np.arange(nsrc)] = 1.0
    if store_history:
        hist[0] = s0
    m = s0[src[s_pos]] * probs[s_pos, None]
    for length in np.unique(lengths[s_pos]):
        grp = lengths[s_pos] == length
        np.add.at(ring[length % ring_depth], targets[s_pos][grp], m[grp])

    for t in range(1, horizon + 1):
        slot = t % ring_depth
        a = ring[slot].copy()
        ring[slot][:] = 0.0
        # (1) direct standard arrivals at absorbing nodes
        absorbed[t] += a[std_abs].sum(axis=0)
        # (2) wait arrivals: loops push ahead, exits resolve in this tick
        extra = np.zeros((n, nsrc))
        if w_pos.any():
            m = a[src[w_pos]] * probs[w_pos, None]
            for length in np.unique(lengths[w_pos]):
                grp = lengths[w_pos] == length
                np.add.at(ring[(t + length) % ring_depth],
                          targets[w_pos][grp], m[grp])
        if w_zero_abs.any():
            absorbed[t] += (a[src[w_zero_abs]] * probs[w_zero_abs, None]).sum(axis=0)
        if w_zero_std.any():
            np.add.at(extra, targets[w_zero_std],
                      a[src[w_zero_std]] * probs[w_zero_std, None])
        # (3) propagate the surviving standard mass
        s = np.zeros((n, nsrc))
        s[std_nonabs] = a[std_nonabs] + extra[std_nonabs]
        if store_history:
            hist[t] = s
            hist[t][is_wait] = a[is_wait]
        m = s[src[s_pos]] * probs[s_pos, None]
        for length in np.unique(lengths[s_pos]):
            grp = lengths[s_pos] == length
            np.add.at(ring[(t + length) % ring_depth], targets[s_pos][grp], m[grp])

    return absorbed, hist


def fp_backward(indptr, targets, lengths, probs, is_wait, absorbing, sources,
                horizon, hist, absorbed_bar):
    """Reverse sweep of :func:`fp_forward`.

    Given adjoints of the absorbed buckets, accumulates the adjoint of every
    edge probability.  ``hist`` must come from a forward run over the same
    inputs with ``store_history=True``.
    """
    n = len(indptr) - 1
    nsrc = hist.shape[2]
    is_wait = np.asarray(is_wait, dtype=bool)
    absorbing = np.asarray(absorbing, dtype=bool)
    src, w_zero, w_pos, s_pos = _edge_groups(indptr, targets, lengths, is_wait, n)
    maxlen = int(lengths.max()) if len(lengths) else 1
    ring_depth = maxlen + 1
    abar = np.zeros((ring_depth, n, nsrc))
    ebar = np.zeros(len(targets))

    std_nonabs_edges = s_pos & ~absorbing[src]
    for t in range(horizon, 0, -1):
        # reverse (3): adjoint of the propagated standard mass
        sbar = np.zeros((n, nsrc))
        e = std_nonabs_edges
        down = abar[(t + lengths[e]) % ring_depth, targets[e]]
        np.add.at(sbar, src[e], probs[e, None] * down)
        ebar[e] += (hist[t][src[e]] * down).sum(axis=1)
        # reverse (2): wait arrivals
        at = np.zeros((n, nsrc))
        if w_pos.any():
            e = w_pos
            down = abar[(t + lengths[e]) % ring_depth, targets[e]]
            np.add.at(at, src[e], probs[e, None] * down)
            ebar[e] += (hist[t][src[e]] * down).sum(axis=1)
        if w_zero.any():
            e = w_zero
            down = np.where(absorbing[targets[e], None],
                            absorbed_bar[t][None, :], sbar[targets[e]])
            np.add.at(at, src[e], probs[e, None] * down)
            ebar[e] += (hist[t][src[e]] * down).sum(axis=1)
        # reverse (1): adjoint of raw standard arrivals
        std = ~is_wait
        at[std & absorbing] = absorbed_bar[t]
        at[std & ~absorbing] = sbar[std & ~absorbing]
        abar[t % ring_depth] = at
    # tick 0: pushes from the unit source mass
    for j, s0 in enumerate(sources):
        sl = slice(indptr[s0], indptr[s0 + 1])
        down = abar[lengths[sl] % ring_depth, targets[sl], j]
        ebar[sl] += hist[0][s0, j] * down
    return ebar


def sample_walk(indptr, cumprobs, edge_resolved, edge_wait, edge_time,
                wait_loop_prob, start, steps, rand):
    """Walk ``steps`` moves between standard nodes under the strategy.

    ``rand`` is a (steps, 2) array of uniforms in [0, 1); the first column
    selects the successor edge (binary search over prefix sums), the second
    is consumed only for moves routed through a wait vertex, mapped to
    ``1 - u`` in (0, 1] for the closed-form geometric wait.
    """
    nodes = np.empty(steps + 1, dtype=np.int64)
    taus = np.empty(steps, dtype=np.int64)
    nodes[0] = start
    cur = int(start)
    for i in range(steps):
        lo = int(indptr[cur])
        hi = int(indptr[cur + 1])
        r = rand[i, 0]
        e = lo + int(np.searchsorted(cumprobs[lo:hi], r, side="right"))
        if e >= hi:
            e = hi - 1
            while e > lo and cumprobs[e] == cumprobs[e - 1]:
                e -= 1
        tau = int(edge_time[e])
        w = int(edge_wait[e])
        if w >= 0:
            p = float(wait_loop_prob[w])
            r2 = 1.0 - rand[i, 1]
            if p > 0.0 and r2 < 1.0:
                tau += max(0, int(math.floor(math.log(r2) / math.log(p))))
        cur = int(edge_resolved[e])
        nodes[i + 1] = cur
        taus[i] = tau
    return nodes, taus


def _payoff(pf_prefix, pf_off, pf_k, pf_d, pf_c, u, t):
    if t < pf_k[u]:
        return pf_prefix[pf_off[u] + t - 1]
    return pf_d[u] + (t - pf_k[u]) * pf_c[u]


def best_cycle_scan(nodes, taus, n_aug, base_of, pf_prefix, pf_off, pf_k,
                    pf_d, pf_c, c_vals, total_c, n_base, ell):
    """Scan a sampled walk for its best generating cycle.

    For every position b, candidate cycle starts are the earlier positions
    holding the same augmented node within the last ``ell`` steps, visited
    nearest-first.  Each candidate is evaluated incrementally: extending a
    cycle backwards only adds the new segment's revisit payoffs and refreshes
    the per-node wraparound terms.  Ties keep the earliest candidate found.

    Returns ``(best_value, best_a, best_b, candidates_evaluated)``;
    ``best_b < 0`` means the walk never revisited an augmented node within
    the window.
    """
    s = len(taus)
    cum = np.zeros(s + 1, dtype=np.int64)
    np.cumsum(taus, out=cum[1:])
    last_seen = np.full(n_aug, -1, dtype=np.int64)
    prev_pos = np.full(s + 1, -1, dtype=np.int64)
    for i in range(s + 1):
        v = nodes[i]
        prev_pos[i] = last_seen[v]
        last_seen[v] = i

    stamp = np.full(n_base, -1, dtype=np.int64)
    first_pos = np.zeros(n_base, dtype=np.int64)
    last_pos = np.zeros(n_base, dtype=np.int64)

    best = -math.inf
    best_a = best_b = -1
    n_candidates = 0
    for b in range(1, s + 1):
        a = int(prev_pos[b])
        if a < 0 or b - a > ell:
            continue
        low = b
        internal = 0.0
        present_c = 0.0
        while a >= 0 and b - a <= ell:
            for p in range(low - 1, a - 1, -1):
                u = int(base_of[nodes[p]])
                if stamp[u] != b:
                    stamp[u] = b
                    first_pos[u] = p
                    last_pos[u] = p
                    present_c += c_vals[u]
                else:
                    internal += _payoff(pf_prefix, pf_off, pf_k, pf_d, pf_c,
                                        u, int(cum[first_pos[u]] - cum[p]))
                    first_pos[u] = p
            low = a
            length = int(cum[b] - cum[a])
            wrap = 0.0
            for u in range(n_base):
                if stamp[u] == b:
                    gap = length - int(cum[last_pos[u]] - cum[first_pos[u]])
                    wrap += _payoff(pf_prefix, pf_off, pf_k, pf_d, pf_c, u, gap)
            value = (total_c - present_c) + (internal + wrap) / length
            n_candidates += 1
            if value > best:
                best = value
                best_a = a
                best_b = b
            a = int(prev_pos[a])
    return best, best_a, best_b, n_candidates
