"""Highest-label push-relabel on integer capacities (first phase only).

The first phase computes a maximum preflow, which already fixes the minimum
cut: the nodes that can still reach the sink in the residual network form the
smallest sink side. Arcs are stored in CSR order with an explicit reverse-arc
index.
"""

import numpy as np
from numba import njit


def build_csr(n_nodes, tail, head, cap, rcap):
    """CSR arrays for arc pairs ``tail -> head`` (capacity ``cap``) and back (``rcap``)."""
    tail = np.asarray(tail, dtype=np.int64)
    head = np.asarray(head, dtype=np.int64)
    m = len(tail)
    src = np.concatenate([tail, head])
    dst = np.concatenate([head, tail])
    caps = np.concatenate([np.asarray(cap, dtype=np.int64), np.asarray(rcap, dtype=np.int64)])
    order = np.argsort(src, kind="stable")
    pos = np.empty(2 * m, dtype=np.int64)
    pos[order] = np.arange(2 * m)
    partner = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    rev = pos[partner[order]]
    start = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(start, src + 1, 1)
    start = np.cumsum(start)
    return start, dst[order].copy(), caps[order].copy(), rev


@njit(cache=True)
def _global_relabel(n, snk, start, head, cap, rev, label):
    for v in range(n):
        label[v] = n
    label[snk] = 0
    queue = np.empty(n, dtype=np.int64)
    qh, qt = 0, 0
    queue[qt] = snk
    qt += 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        for a in range(start[v], start[v + 1]):
            u = head[a]
            if label[u] == n and cap[rev[a]] > 0 and u != snk:
                label[u] = label[v] + 1
                queue[qt] = u
                qt += 1


@njit(cache=True)
def push_relabel(n, src, snk, start, head, cap, rev):
    """Maximum preflow in place on ``cap``; returns ``(value, pushes, relabels)``."""
    excess = np.zeros(n, dtype=np.int64)
    label = np.zeros(n, dtype=np.int64)
    cur = start[:-1].copy()
    bhead = np.full(n + 1, -1, dtype=np.int64)
    bnext = np.full(n, -1, dtype=np.int64)
    inbucket = np.zeros(n, dtype=np.bool_)
    count = np.zeros(n + 1, dtype=np.int64)
    pushes = 0
    relabels = 0

    for a in range(start[src], start[src + 1]):
        d = cap[a]
        if d > 0:
            v = head[a]
            cap[a] = 0
            cap[rev[a]] += d
            excess[v] += d
            excess[src] -= d

    _global_relabel(n, snk, start, head, cap, rev, label)
    label[src] = n
    top = -1
    for v in range(n):
        if label[v] < n:
            count[label[v]] += 1
        if v != src and v != snk and excess[v] > 0 and label[v] < n:
            bnext[v] = bhead[label[v]]
            bhead[label[v]] = v
            inbucket[v] = True
            if label[v] > top:
                top = label[v]

    work_since = 0
    while top >= 0:
        u = bhead[top]
        if u < 0:
            top -= 1
            continue
        bhead[top] = bnext[u]
        inbucket[u] = False
        if label[u] != top or label[u] >= n:
            continue
        # discharge u
        while excess[u] > 0:
            a = cur[u]
            if a == start[u + 1]:
                # relabel
                old = label[u]
                best = n
                for b in range(start[u], start[u + 1]):
                    if cap[b] > 0:
                        lv = label[head[b]] + 1
                        if lv < best:
                            best = lv
                relabels += 1
                work_since += 1
                count[old] -= 1
                if count[old] == 0:
                    # gap: nothing above can reach the sink any more
                    for w in range(n):
                        if old < label[w] < n:
                            count[label[w]] -= 1
                            label[w] = n
                    label[u] = n
                    break
                label[u] = best
                if best >= n:
                    break
                count[best] += 1
                cur[u] = start[u]
                continue
            v = head[a]
            if cap[a] > 0 and label[u] == label[v] + 1:
                d = min(excess[u], cap[a])
                cap[a] -= d
                cap[rev[a]] += d
                excess[u] -= d
                if excess[v] == 0 and v != snk and v != src and not inbucket[v]:
                    bnext[v] = bhead[label[v]]
                    bhead[label[v]] = v
                    inbucket[v] = True
                    if label[v] > top:
                        top = label[v]
                excess[v] += d
                pushes += 1
                if excess[u] == 0:
                    break
            cur[u] = a + 1
        if excess[u] > 0 and label[u] < n and not inbucket[u]:
            bnext[u] = bhead[label[u]]
            bhead[label[u]] = u
            inbucket[u] = True
            if label[u] > top:
                top = label[u]
        if work_since > n:
            # periodic global relabel; rebuild buckets
            work_since = 0
            _global_relabel(n, snk, start, head, cap, rev, label)
            label[src] = n
            for k in range(n + 1):
                bhead[k] = -1
                count[k] = 0
            top = -1
            for v in range(n):
                inbucket[v] = False
                cur[v] = start[v]
                if label[v] < n:
                    count[label[v]] += 1
                if v != src and v != snk and excess[v] > 0 and label[v] < n:
                    bnext[v] = bhead[label[v]]
                    bhead[label[v]] = v
                    inbucket[v] = True
                    if label[v] > top:
                        top = label[v]
            continue
        if label[u] >= n:
            continue
        # the highest active label can only have grown to label[u]
        if label[u] > top:
            top = label[u]
    return excess[snk], pushes, relabels


@njit(cache=True)
def reaches_sink(n, snk, start, head, cap, rev):
    """Boolean mask of nodes with a residual path to ``snk``."""
    seen = np.zeros(n, dtype=np.bool_)
    seen[snk] = True
    queue = np.empty(n, dtype=np.int64)
    qh, qt = 0, 1
    queue[0] = snk
    while qh < qt:
        v = queue[qh]
        qh += 1
        for a in range(start[v], start[v + 1]):
            u = head[a]
            if not seen[u] and cap[rev[a]] > 0:
                seen[u] = True
                queue[qt] = u
                qt += 1
    return seen
