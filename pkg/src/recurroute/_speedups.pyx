# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: first-passage mass propagation (forward + reverse) and
the walk sampler / generating-cycle scan.

Semantics mirror ``_kernels_py`` exactly; see that module for the contract.
"""
from libc.math cimport floor, log

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64
ctypedef cnp.uint8_t u8


def fp_forward(i64[::1] indptr, i64[::1] targets, i64[::1] lengths,
               f64[::1] probs, u8[::1] is_wait, u8[::1] absorbing,
               i64[::1] sources, long horizon, bint store_history):
    cdef long n = indptr.shape[0] - 1
    cdef long nsrc = sources.shape[0]
    cdef long n_edges = targets.shape[0]
    cdef long maxlen = 1, e, t, v, w, j, slot, tgt
    cdef i64 length
    for e in range(n_edges):
        if lengths[e] > maxlen:
            maxlen = lengths[e]
    cdef long depth = maxlen + 1

    ring_arr = np.zeros((depth, n, nsrc))
    absorbed_arr = np.zeros((horizon + 1, nsrc))
    hist_arr = np.zeros((horizon + 1 if store_history else 1, n, nsrc))
    a_arr = np.zeros((n, nsrc))
    s_arr = np.zeros((n, nsrc))
    cdef f64[:, :, ::1] ring = ring_arr
    cdef f64[:, ::1] absorbed = absorbed_arr
    cdef f64[:, :, ::1] hist = hist_arr
    cdef f64[:, ::1] a = a_arr
    cdef f64[:, ::1] s = s_arr
    cdef f64 m

    # tick 0: unit mass at each source propagates along its edges
    for j in range(nsrc):
        v = sources[j]
        if store_history:
            hist[0, v, j] = 1.0
        for e in range(indptr[v], indptr[v + 1]):
            ring[lengths[e] % depth, targets[e], j] += probs[e]

    for t in range(1, horizon + 1):
        slot = t % depth
        for v in range(n):
            for j in range(nsrc):
                a[v, j] = ring[slot, v, j]
                ring[slot, v, j] = 0.0
                s[v, j] = 0.0
        # (1) direct standard arrivals at absorbing nodes
        for v in range(n):
            if absorbing[v] and not is_wait[v]:
                for j in range(nsrc):
                    absorbed[t, j] += a[v, j]
        # (2) wait arrivals: loops push ahead, exits resolve in this tick
        for w in range(n):
            if not is_wait[w]:
                continue
            for e in range(indptr[w], indptr[w + 1]):
                tgt = targets[e]
                length = lengths[e]
                if length == 0:
                    if absorbing[tgt]:
                        for j in range(nsrc):
                            absorbed[t, j] += a[w, j] * probs[e]
                    else:
                        for j in range(nsrc):
                            s[tgt, j] += a[w, j] * probs[e]
                else:
                    for j in range(nsrc):
                        ring[(t + length) % depth, tgt, j] += a[w, j] * probs[e]
        # (3) propagate the surviving standard mass
        for v in range(n):
            if is_wait[v]:
                if store_history:
                    for j in range(nsrc):
                        hist[t, v, j] = a[v, j]
                continue
            if absorbing[v]:
                for j in range(nsrc):
                    s[v, j] = 0.0
                continue
            for j in range(nsrc):
                s[v, j] += a[v, j]
            if store_history:
                for j in range(nsrc):
                    hist[t, v, j] = s[v, j]
            for e in range(indptr[v], indptr[v + 1]):
                tgt = targets[e]
                slot = (t + lengths[e]) % depth
                for j in range(nsrc):
                    ring[slot, tgt, j] += s[v, j] * probs[e]

    return absorbed_arr, (hist_arr if store_history else None)


def fp_backward(i64[::1] indptr, i64[::1] targets, i64[::1] lengths,
                f64[::1] probs, u8[::1] is_wait, u8[::1] absorbing,
                i64[::1] sources, long horizon, f64[:, :, ::1] hist,
                f64[:, ::1] absorbed_bar):
    cdef long n = indptr.shape[0] - 1
    cdef long nsrc = hist.shape[2]
    cdef long n_edges = targets.shape[0]
    cdef long maxlen = 1, e, t, v, w, j, tgt
    cdef i64 length
    for e in range(n_edges):
        if lengths[e] > maxlen:
            maxlen = lengths[e]
    cdef long depth = maxlen + 1

    abar_arr = np.zeros((depth, n, nsrc))
    ebar_arr = np.zeros(n_edges)
    sbar_arr = np.zeros((n, nsrc))
    at_arr = np.zeros((n, nsrc))
    cdef f64[:, :, ::1] abar = abar_arr
    cdef f64[::1] ebar = ebar_arr
    cdef f64[:, ::1] sbar = sbar_arr
    cdef f64[:, ::1] at = at_arr
    cdef f64 down, acc

    for t in range(horizon, 0, -1):
        for v in range(n):
            for j in range(nsrc):
                sbar[v, j] = 0.0
        # reverse (3)
        for v in range(n):
            if is_wait[v] or absorbing[v]:
                continue
            for e in range(indptr[v], indptr[v + 1]):
                tgt = targets[e]
                acc = 0.0
                for j in range(nsrc):
                    down = abar[(t + lengths[e]) % depth, tgt, j]
                    sbar[v, j] += probs[e] * down
                    acc += hist[t, v, j] * down
                ebar[e] += acc
        # reverse (2)
        for w in range(n):
            if not is_wait[w]:
                continue
            for j in range(nsrc):
                at[w, j] = 0.0
            for e in range(indptr[w], indptr[w + 1]):
                tgt = targets[e]
                length = lengths[e]
                acc = 0.0
                if length == 0:
                    for j in range(nsrc):
                        down = absorbed_bar[t, j] if absorbing[tgt] else sbar[tgt, j]
                        at[w, j] += probs[e] * down
                        acc += hist[t, w, j] * down
                else:
                    for j in range(nsrc):
                        down = abar[(t + length) % depth, tgt, j]
                        at[w, j] += probs[e] * down
                        acc += hist[t, w, j] * down
                ebar[e] += acc
        # reverse (1)
        for v in range(n):
            if is_wait[v]:
                continue
            if absorbing[v]:
                for j in range(nsrc):
                    at[v, j] = absorbed_bar[t, j]
            else:
                for j in range(nsrc):
                    at[v, j] = sbar[v, j]
        for v in range(n):
            for j in range(nsrc):
                abar[t % depth, v, j] = at[v, j]
    # tick 0
    for j in range(nsrc):
        v = sources[j]
        for e in range(indptr[v], indptr[v + 1]):
            ebar[e] += hist[0, v, j] * abar[lengths[e] % depth, targets[e], j]
    return ebar_arr


def sample_walk(i64[::1] indptr, f64[::1] cumprobs, i64[::1] edge_resolved,
                i64[::1] edge_wait, i64[::1] edge_time,
                f64[::1] wait_loop_prob, long start, long steps,
                f64[:, ::1] rand):
    nodes_arr = np.empty(steps + 1, dtype=np.int64)
    taus_arr = np.empty(steps, dtype=np.int64)
    cdef i64[::1] nodes = nodes_arr
    cdef i64[::1] taus = taus_arr
    cdef long cur = start, i, lo, hi, mid, e, w
    cdef i64 tau
    cdef f64 r, r2, p
    nodes[0] = start
    for i in range(steps):
        lo = indptr[cur]
        hi = indptr[cur + 1]
        r = rand[i, 0]
        # least edge with cumulative probability > r
        while lo < hi:
            mid = (lo + hi) // 2
            if cumprobs[mid] > r:
                hi = mid
            else:
                lo = mid + 1
        e = lo
        if e >= indptr[cur + 1]:
            e = indptr[cur + 1] - 1
            while e > indptr[cur] and cumprobs[e] == cumprobs[e - 1]:
                e -= 1
        tau = edge_time[e]
        w = edge_wait[e]
        if w >= 0:
            p = wait_loop_prob[w]
            r2 = 1.0 - rand[i, 1]
            if p > 0.0 and r2 < 1.0:
                tau += <i64>floor(log(r2) / log(p))
        cur = edge_resolved[e]
        nodes[i + 1] = cur
        taus[i] = tau
    return nodes_arr, taus_arr


cdef inline f64 _payoff(f64[::1] pf_prefix, i64[::1] pf_off, i64[::1] pf_k,
                        f64[::1] pf_d, f64[::1] pf_c, long u, i64 t) noexcept:
    if t < pf_k[u]:
        return pf_prefix[pf_off[u] + t - 1]
    return pf_d[u] + (t - pf_k[u]) * pf_c[u]


def best_cycle_scan(i64[::1] nodes, i64[::1] taus, long n_aug,
                    i64[::1] base_of, f64[::1] pf_prefix, i64[::1] pf_off,
                    i64[::1] pf_k, f64[::1] pf_d, f64[::1] pf_c,
                    f64[::1] c_vals, f64 total_c, long n_base, long ell):
    cdef long s = taus.shape[0]
    cdef long i, b, a, low, p, u
    cdef i64 length, gap
    cdef f64 internal, present_c, wrap, value
    cdef f64 best = -np.inf
    cdef long best_a = -1, best_b = -1
    cdef long n_candidates = 0

    cum_arr = np.zeros(s + 1, dtype=np.int64)
    last_seen_arr = np.full(n_aug, -1, dtype=np.int64)
    prev_pos_arr = np.full(s + 1, -1, dtype=np.int64)
    stamp_arr = np.full(n_base, -1, dtype=np.int64)
    first_pos_arr = np.zeros(n_base, dtype=np.int64)
    last_pos_arr = np.zeros(n_base, dtype=np.int64)
    cdef i64[::1] cum = cum_arr
    cdef i64[::1] last_seen = last_seen_arr
    cdef i64[::1] prev_pos = prev_pos_arr
    cdef i64[::1] stamp = stamp_arr
    cdef i64[::1] first_pos = first_pos_arr
    cdef i64[::1] last_pos = last_pos_arr

    for i in range(s):
        cum[i + 1] = cum[i] + taus[i]
    for i in range(s + 1):
        prev_pos[i] = last_seen[nodes[i]]
        last_seen[nodes[i]] = i

    for b in range(1, s + 1):
        a = prev_pos[b]
        if a < 0 or b - a > ell:
            continue
        low = b
        internal = 0.0
        present_c = 0.0
        while a >= 0 and b - a <= ell:
            for p in range(low - 1, a - 1, -1):
                u = base_of[nodes[p]]
                if stamp[u] != b:
                    stamp[u] = b
                    first_pos[u] = p
                    last_pos[u] = p
                    present_c += c_vals[u]
                else:
                    internal += _payoff(pf_prefix, pf_off, pf_k, pf_d, pf_c,
                                        u, cum[first_pos[u]] - cum[p])
                    first_pos[u] = p
            low = a
            length = cum[b] - cum[a]
            wrap = 0.0
            for u in range(n_base):
                if stamp[u] == b:
                    gap = length - (cum[last_pos[u]] - cum[first_pos[u]])
                    wrap += _payoff(pf_prefix, pf_off, pf_k, pf_d, pf_c, u, gap)
            value = (total_c - present_c) + (internal + wrap) / length
            n_candidates += 1
            if value > best:
                best = value
                best_a = a
                best_b = b
            a = prev_pos[a]
    return best, best_a, best_b, n_candidates
