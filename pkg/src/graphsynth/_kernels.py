"""Compiled inner loops for the matcher.

All kernels are sequential with a fixed loop order, so results do not depend
on the machine's thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

PROGRESSIVE = 0
DIVIDE = 1


@njit(cache=True)
def _hist(v, indptr, nbrs, assign, h, nz):
    """Placed-neighbour group counts of ``v`` into ``h``; returns #touched groups."""
    cnt = 0
    for j in range(indptr[v], indptr[v + 1]):
        g = assign[nbrs[j]]
        if g < 0:
            continue
        if h[g] == 0:
            nz[cnt] = g
            cnt += 1
        h[g] += 1
    return cnt


@njit(cache=True)
def greedy_steps(order, start, stop, indptr, nbrs, loops, assign, fill, q,
                 C, D, W, m_target, seen, resid, rule):
    """Place ``order[start:stop]``; ``seen`` and ``resid`` are 1-element carries."""
    k = q.shape[0]
    h = np.zeros(k, np.int64)
    nz = np.zeros(k, np.int64)
    for i in range(start, stop):
        v = order[i]
        cnt = _hist(v, indptr, nbrs, assign, h, nz)
        L = loops[v]
        e = L
        hh = 0.0
        for a in range(cnt):
            x = h[nz[a]]
            e += x
            hh += float(x) * float(x)
        lag = 1.0
        if m_target > 0:
            lag = 1.0 - (seen[0] + e) / m_target
        best_t = -1
        best = 0.0
        best_room = 0.0
        best_delta = 0.0
        for t in range(k):
            if fill[t] >= q[t]:
                continue
            room = 1.0 - fill[t] / q[t]
            dh = 0.0
            wh = 0.0
            for a in range(cnt):
                g = nz[a]
                dh += D[t, g] * h[g]
                wh += W[t, g] * h[g]
            delta = 2.0 * dh + hh
            if L:
                delta += 2.0 * L * (D[t, t] + h[t]) + float(L * L)
            if rule == PROGRESSIVE:
                gain = -(delta + 2.0 * lag * wh)
                if L:
                    gain -= 2.0 * L * lag * W[t, t]
                sc = gain * room if gain > 0 else 0.0
                if best_t < 0 or sc > best or (sc == best and room > best_room):
                    best_t, best, best_room, best_delta = t, sc, room, delta
            else:
                sc = (resid[0] + delta) / room
                if best_t < 0 or sc < best:
                    best_t, best, best_delta = t, sc, delta
        if best_t < 0:
            return i
        t = best_t
        for a in range(cnt):
            g = nz[a]
            x = h[g]
            C[t, g] += x
            D[t, g] += x
            if g != t:
                C[g, t] += x
                D[g, t] += x
            h[g] = 0
        if L:
            C[t, t] += L
            D[t, t] += L
        resid[0] += best_delta
        seen[0] += e
        assign[v] = t
        fill[t] += 1
    return stop


@njit(cache=True)
def greedy_steps_bipartite(order, start, stop, nt, indptr, nbrs, assign,
                           fill_t, q_t, fill_h, q_h, C, D, W, m_target, seen, resid, rule):
    """Bipartite variant; ``D``/``C``/``W`` are tail-group x head-group."""
    kt = q_t.shape[0]
    kh = q_h.shape[0]
    kmax = max(kt, kh)
    h = np.zeros(kmax, np.int64)
    nz = np.zeros(kmax, np.int64)
    for i in range(start, stop):
        v = order[i]
        tail = v < nt
        cnt = _hist(v, indptr, nbrs, assign, h, nz)
        e = 0
        hh = 0.0
        for a in range(cnt):
            x = h[nz[a]]
            e += x
            hh += float(x) * float(x)
        lag = 1.0
        if m_target > 0:
            lag = 1.0 - (seen[0] + e) / m_target
        fill = fill_t if tail else fill_h
        q = q_t if tail else q_h
        kk = kt if tail else kh
        best_t = -1
        best = 0.0
        best_room = 0.0
        best_delta = 0.0
        for t in range(kk):
            if fill[t] >= q[t]:
                continue
            room = 1.0 - fill[t] / q[t]
            dh = 0.0
            wh = 0.0
            for a in range(cnt):
                g = nz[a]
                if tail:
                    dh += D[t, g] * h[g]
                    wh += W[t, g] * h[g]
                else:
                    dh += D[g, t] * h[g]
                    wh += W[g, t] * h[g]
            delta = 2.0 * dh + hh
            if rule == PROGRESSIVE:
                gain = -(delta + 2.0 * lag * wh)
                sc = gain * room if gain > 0 else 0.0
                if best_t < 0 or sc > best or (sc == best and room > best_room):
                    best_t, best, best_room, best_delta = t, sc, room, delta
            else:
                sc = (resid[0] + delta) / room
                if best_t < 0 or sc < best:
                    best_t, best, best_delta = t, sc, delta
        if best_t < 0:
            return i
        t = best_t
        for a in range(cnt):
            g = nz[a]
            x = h[g]
            if tail:
                C[t, g] += x
                D[t, g] += x
            else:
                C[g, t] += x
                D[g, t] += x
            h[g] = 0
        resid[0] += best_delta
        seen[0] += e
        assign[v] = t
        fill[t] += 1
    return stop


@njit(cache=True)
def ldg_steps(order, indptr, nbrs, assign, fill, cap):
    k = cap.shape[0]
    h = np.zeros(k, np.int64)
    nz = np.zeros(k, np.int64)
    for i in range(order.shape[0]):
        v = order[i]
        cnt = _hist(v, indptr, nbrs, assign, h, nz)
        best_t = -1
        best = 0.0
        best_room = 0.0
        for t in range(k):
            if fill[t] >= cap[t]:
                continue
            room = 1.0 - fill[t] / cap[t]
            sc = h[t] * room
            if best_t < 0 or sc > best or (sc == best and room > best_room):
                best_t, best, best_room = t, sc, room
        for a in range(cnt):
            h[nz[a]] = 0
        if best_t < 0:
            return i
        assign[v] = best_t
        fill[best_t] += 1
    return order.shape[0]


# ------------------------------------------------------------------ refinement
#
# Swap refinement: for every group pair (s, t), nodes of s that would like to
# sit in t are paired with nodes of t that would like to sit in s, best
# estimated gains first. Each swap is applied, its exact residual change is
# measured, and it is undone unless the residual strictly drops. Swaps keep
# every group size fixed.


@njit(cache=True)
def _members(assign, lo, hi, q):
    k = q.shape[0]
    off = np.zeros(k + 1, np.int64)
    for t in range(k):
        off[t + 1] = off[t] + q[t]
    mem = np.empty(off[k], np.int64)
    pos = np.empty(hi - lo, np.int64)
    cur = off[:k].copy()
    for v in range(lo, hi):
        g = assign[v]
        mem[cur[g]] = v
        pos[v - lo] = cur[g]
        cur[g] += 1
    return off, mem, pos


@njit(cache=True)
def _sym_est(v, s, t, H, loops, D):
    """Residual change if ``v`` alone moved from ``s`` to ``t`` (symmetric counts)."""
    k = D.shape[0]
    hh = 0.0
    ds = 0.0
    dt = 0.0
    for g in range(k):
        x = H[v, g]
        if x:
            hh += float(x) * float(x)
            ds += D[s, g] * x
            dt += D[t, g] * x
    hs = H[v, s]
    ht = H[v, t]
    d = 2.0 * dt - 2.0 * ds + 2.0 * hh - 2.0 * float(hs) * float(ht)
    L = loops[v]
    if L:
        d += 2.0 * L * ((D[t, t] + ht) - (D[s, s] - hs)) + 2.0 * L * L
    return d


@njit(cache=True)
def _sym_bump(D, i, j, x):
    old = D[i, j]
    new = old + x
    D[i, j] = new
    if i != j:
        D[j, i] = new
    return new * new - old * old


@njit(cache=True)
def _multiplicity(v, w, indptr, nbrs):
    """Number of v-w edges, scanning the shorter neighbour list."""
    if indptr[v + 1] - indptr[v] > indptr[w + 1] - indptr[w]:
        v, w = w, v
    c = 0
    for j in range(indptr[v], indptr[v + 1]):
        if nbrs[j] == w:
            c += 1
    return c


@njit(cache=True)
def _sym_swap_delta(v, w, s, t, H, loops, indptr, nbrs, D, ds, dt):
    """Exact residual change of swapping ``v`` (in s) with ``w`` (in t), no mutation.

    ``ds[g]`` / ``dt[g]`` collect the count changes of pairs {s,g} / {t,g};
    the shared pair {s,t} lives in ``ds[t]``.
    """
    k = D.shape[0]
    A = _multiplicity(v, w, indptr, nbrs)
    for g in range(k):
        hv = H[v, g]
        hw = H[w, g]
        if g == s:
            hw -= A
        elif g == t:
            hw += A
        ds[g] = hw - hv
        dt[g] = hv - hw
    ds[t] += dt[s]
    dt[s] = 0
    dl = loops[w] - loops[v]
    ds[s] += dl
    dt[t] -= dl
    d = 0.0
    for g in range(k):
        x = ds[g]
        if x:
            d += x * (2.0 * D[s, g] + x)
        if g != s:
            y = dt[g]
            if y:
                d += y * (2.0 * D[t, g] + y)
    return d


@njit(cache=True)
def _sym_move(v, t, assign, H, loops, indptr, nbrs, D):
    s = assign[v]
    k = D.shape[0]
    d = 0.0
    for g in range(k):
        x = H[v, g]
        if x:
            d += _sym_bump(D, s, g, -x)
    for g in range(k):
        x = H[v, g]
        if x:
            d += _sym_bump(D, t, g, x)
    L = loops[v]
    if L:
        d += _sym_bump(D, s, s, -L)
        d += _sym_bump(D, t, t, L)
    for j in range(indptr[v], indptr[v + 1]):
        u = nbrs[j]
        H[u, s] -= 1
        H[u, t] += 1
    assign[v] = t
    return d


@njit(cache=True)
def _candidates(s, t, off, mem, est_s, est_t):
    """Members of ``s`` and ``t`` paired best-estimate first, while the pair looks profitable."""
    ns = off[s + 1] - off[s]
    nt = off[t + 1] - off[t]
    cs = np.argsort(est_s, kind="mergesort")
    ct = np.argsort(est_t, kind="mergesort")
    m = 0
    while m < min(ns, nt) and est_s[cs[m]] + est_t[ct[m]] < 0:
        m += 1
    vs = np.empty(m, np.int64)
    vt = np.empty(m, np.int64)
    for a in range(m):
        vs[a] = mem[off[s] + cs[a]]
        vt[a] = mem[off[t] + ct[a]]
    return vs, vt


@njit(cache=True)
def _swap_slots(v, w, mem, pos, lo):
    pv = pos[v - lo]
    pw = pos[w - lo]
    mem[pv] = w
    mem[pw] = v
    pos[v - lo] = pw
    pos[w - lo] = pv


@njit(cache=True)
def _estimates(H, loops, D, assign, lo, sym):
    """Single-move residual change for every node and target group (one snapshot)."""
    nn = H.shape[0]
    k = D.shape[0]
    ko = H.shape[1]
    est = np.empty((nn, k), np.float32)
    best = np.full((k, k), np.inf)
    nz = np.empty(ko, np.int64)
    dh = np.empty(k)
    for i in range(nn):
        s = assign[lo + i]
        cnt = 0
        hh = 0.0
        for g in range(ko):
            if H[i, g]:
                nz[cnt] = g
                cnt += 1
                hh += float(H[i, g]) * float(H[i, g])
        for t in range(k):
            acc = 0.0
            for a in range(cnt):
                acc += D[t, nz[a]] * H[i, nz[a]]
            dh[t] = acc
        L = loops[lo + i] if sym else 0
        for t in range(k):
            if t == s:
                est[i, t] = np.inf
                continue
            d = 2.0 * (dh[t] - dh[s]) + 2.0 * hh
            if sym:
                hs = H[i, s]
                ht = H[i, t]
                d -= 2.0 * float(hs) * float(ht)
                if L:
                    d += 2.0 * L * ((D[t, t] + ht) - (D[s, s] - hs)) + 2.0 * L * L
            est[i, t] = d
            if d < best[s, t]:
                best[s, t] = d
    return est, best


@njit(cache=True)
def refine_symmetric(indptr, nbrs, loops, assign, q, D, max_rounds, rel_tol, tol, fresh):
    n = assign.shape[0]
    k = q.shape[0]
    H = np.zeros((n, k), np.int32)
    for v in range(n):
        for j in range(indptr[v], indptr[v + 1]):
            H[v, assign[nbrs[j]]] += 1
    off, mem, pos = _members(assign, 0, n, q)
    resid = 0.0
    for i in range(k):
        for j in range(i, k):
            resid += D[i, j] * D[i, j]
    total_swaps = 0
    rounds = 0
    ds = np.zeros(k, np.int64)
    dt = np.zeros(k, np.int64)
    for r in range(max_rounds):
        start = resid
        round_swaps = 0
        est, best = _estimates(H, loops, D, assign, 0, True)
        for s in range(k):
            for t in range(s + 1, k):
                ns = off[s + 1] - off[s]
                nt = off[t + 1] - off[t]
                if ns == 0 or nt == 0 or best[s, t] + best[t, s] >= 0:
                    continue
                est_s = np.empty(ns)
                est_t = np.empty(nt)
                for a in range(ns):
                    v = mem[off[s] + a]
                    est_s[a] = _sym_est(v, s, t, H, loops, D) if fresh else est[v, t]
                for b in range(nt):
                    w = mem[off[t] + b]
                    est_t[b] = _sym_est(w, t, s, H, loops, D) if fresh else est[w, s]
                vs, vt = _candidates(s, t, off, mem, est_s, est_t)
                for a in range(vs.shape[0]):
                    v = vs[a]
                    w = vt[a]
                    if _sym_swap_delta(v, w, s, t, H, loops, indptr, nbrs, D, ds, dt) < -tol:
                        d = _sym_move(v, t, assign, H, loops, indptr, nbrs, D)
                        d += _sym_move(w, s, assign, H, loops, indptr, nbrs, D)
                        round_swaps += 1
                        resid += d
                        _swap_slots(v, w, mem, pos, 0)
        rounds += 1
        total_swaps += round_swaps
        if round_swaps == 0 or start - resid <= rel_tol * start:
            break
    return rounds, total_swaps


@njit(cache=True)
def _row_est(v, s, t, H, D):
    kh = D.shape[1]
    d = 0.0
    for g in range(kh):
        x = H[v, g]
        if x:
            d += 2.0 * x * (D[t, g] - D[s, g]) + 2.0 * float(x) * float(x)
    return d


@njit(cache=True)
def _row_move(v, t, assign, H, D, lo):
    s = assign[v]
    d = 0.0
    for g in range(D.shape[1]):
        x = H[v - lo, g]
        if x:
            a = D[s, g]
            b = D[t, g]
            D[s, g] = a - x
            D[t, g] = b + x
            d += (a - x) * (a - x) - a * a + (b + x) * (b + x) - b * b
    assign[v] = t
    return d


@njit(cache=True)
def _row_swap_delta(v, w, s, t, H, D):
    d = 0.0
    for g in range(D.shape[1]):
        x = H[w, g] - H[v, g]
        if x:
            d += x * (2.0 * D[s, g] + x) - x * (2.0 * D[t, g] - x)
    return d


@njit(cache=True)
def refine_rows(indptr, nbrs, assign, lo, hi, k_other, q, D, max_rounds, rel_tol, tol, fresh):
    """Refine nodes ``lo..hi-1`` whose groups index the rows of ``D``.

    Their neighbours all lie on the other side and stay put, so the
    neighbour histograms are fixed for the whole pass.
    """
    k = q.shape[0]
    H = np.zeros((hi - lo, k_other), np.int32)
    for v in range(lo, hi):
        for j in range(indptr[v], indptr[v + 1]):
            g = assign[nbrs[j]]
            H[v - lo, g] += 1
    off, mem, pos = _members(assign, lo, hi, q)
    resid = 0.0
    for i in range(D.shape[0]):
        for j in range(D.shape[1]):
            resid += D[i, j] * D[i, j]
    total_swaps = 0
    rounds = 0

    no_loops = np.zeros(hi, np.int64)
    for r in range(max_rounds):
        start = resid
        round_swaps = 0
        est, best = _estimates(H, no_loops, D, assign, lo, False)
        for s in range(k):
            for t in range(s + 1, k):
                ns = off[s + 1] - off[s]
                nt = off[t + 1] - off[t]
                if ns == 0 or nt == 0 or best[s, t] + best[t, s] >= 0:
                    continue
                est_s = np.empty(ns)
                est_t = np.empty(nt)
                for a in range(ns):
                    v = mem[off[s] + a] - lo
                    est_s[a] = _row_est(v, s, t, H, D) if fresh else est[v, t]
                for b in range(nt):
                    w = mem[off[t] + b] - lo
                    est_t[b] = _row_est(w, t, s, H, D) if fresh else est[w, s]
                vs, vt = _candidates(s, t, off, mem, est_s, est_t)
                for a in range(vs.shape[0]):
                    v = vs[a]
                    w = vt[a]
                    if _row_swap_delta(v - lo, w - lo, s, t, H, D) < -tol:
                        d = _row_move(v, t, assign, H, D, lo) + _row_move(w, s, assign, H, D, lo)
                        round_swaps += 1
                        resid += d
                        _swap_slots(v, w, mem, pos, lo)
        rounds += 1
        total_swaps += round_swaps
        if round_swaps == 0 or start - resid <= rel_tol * start:
            break
    return rounds, total_swaps
