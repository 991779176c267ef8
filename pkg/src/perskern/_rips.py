"""Compiled Rips persistence in dimensions 0 and 1.

Dimension 0 is union-find over the sorted edges (elder rule).  Dimension 1
reduces edge coboundaries in reverse filtration order, skipping the
spanning-tree edges already paired in dimension 0 (clearing).  Triangles
are never stored as a list: each one is an int64 key
``value_rank * n**3 + (i * n + j) * n + k`` whose order is the filtration
order (value, then vertex tuple).  A column whose first pivot is unclaimed
is never materialised.  Other columns are reduced in a lazy heap and
stored as their combination of edges; coboundaries are recomputed on
demand.
"""

import math

import numpy as np
from numba import njit, types
from numba.typed import Dict, List


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _tri_key(r, a, b, c, n, n3):
    # sort the three vertices
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
    if a > b:
        a, b = b, a
    return r * n3 + (a * n + b) * n + c


@njit(cache=True)
def _coboundary(a, b, re, erank, n, n3):
    out = np.empty(n, dtype=np.int64)
    m = 0
    for c in range(n):
        if c == a or c == b:
            continue
        ra = erank[a, c]
        rb = erank[b, c]
        if ra < 0 or rb < 0:
            continue
        r = re
        if ra > r:
            r = ra
        if rb > r:
            r = rb
        out[m] = _tri_key(r, a, b, c, n, n3)
        m += 1
    return np.sort(out[:m])


@njit(cache=True)
def _min_cofacet(a, b, re, erank, n, n3):
    best = -1
    for c in range(n):
        if c == a or c == b:
            continue
        ra = erank[a, c]
        rb = erank[b, c]
        if ra < 0 or rb < 0:
            continue
        r = re
        if ra > r:
            r = ra
        if rb > r:
            r = rb
        key = _tri_key(r, a, b, c, n, n3)
        if best < 0 or key < best:
            best = key
        if r == re:
            # vertex triples grow with c, so no later cofacet can be smaller
            break
    return best


@njit(cache=True)
def _heap_push(h, size, x):
    if size == len(h):
        bigger = np.empty(2 * len(h), dtype=np.int64)
        bigger[:size] = h[:size]
        h = bigger
    k = size
    h[k] = x
    while k > 0:
        p = (k - 1) // 2
        if h[p] <= h[k]:
            break
        h[p], h[k] = h[k], h[p]
        k = p
    return h, size + 1


@njit(cache=True)
def _heap_pop(h, size):
    top = h[0]
    size -= 1
    h[0] = h[size]
    k = 0
    while True:
        c = 2 * k + 1
        if c >= size:
            break
        if c + 1 < size and h[c + 1] < h[c]:
            c += 1
        if h[k] <= h[c]:
            break
        h[k], h[c] = h[c], h[k]
        k = c
    return top, size


@njit(cache=True)
def _heap_pivot(h, size):
    # smallest key of odd multiplicity; it stays in the heap
    while size > 0:
        top, size = _heap_pop(h, size)
        if size > 0 and h[0] == top:
            top, size = _heap_pop(h, size)
            continue
        h, size = _heap_push(h, size, top)
        return top, h, size
    return -1, h, size


@njit(cache=True)
def _xor_sorted(x, y):
    out = np.empty(len(x) + len(y), dtype=np.int64)
    i = 0
    j = 0
    m = 0
    while i < len(x) and j < len(y):
        if x[i] < y[j]:
            out[m] = x[i]
            i += 1
            m += 1
        elif y[j] < x[i]:
            out[m] = y[j]
            j += 1
            m += 1
        else:
            i += 1
            j += 1
    while i < len(x):
        out[m] = x[i]
        i += 1
        m += 1
    while j < len(y):
        out[m] = y[j]
        j += 1
        m += 1
    return out[:m]


@njit(cache=True)
def _rips_core(dist, threshold, max_dim):
    n = dist.shape[0]
    # edges in lexicographic order, then a stable sort by length
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= threshold:
                count += 1
    eu = np.empty(count, dtype=np.int64)
    ev = np.empty(count, dtype=np.int64)
    ew = np.empty(count, dtype=np.float64)
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= threshold:
                eu[m] = i
                ev[m] = j
                ew[m] = dist[i, j]
                m += 1
    order = np.argsort(ew, kind="mergesort")
    eu = eu[order]
    ev = ev[order]
    ew = ew[order]

    # dense rank of distinct edge values; rank_values[r] is the value itself
    vrank = np.empty(count, dtype=np.int64)
    rank_values = np.empty(count, dtype=np.float64)
    nr = 0
    for e in range(count):
        if e == 0 or ew[e] != ew[e - 1]:
            rank_values[nr] = ew[e]
            nr += 1
        vrank[e] = nr - 1
    erank = -np.ones((n, n), dtype=np.int64)
    for e in range(count):
        erank[eu[e], ev[e]] = vrank[e]
        erank[ev[e], eu[e]] = vrank[e]

    # dimension 0
    parent = np.arange(n)
    death0 = np.full(n, np.inf)
    mst = np.zeros(count, dtype=np.bool_)
    for e in range(count):
        ra = _find(parent, eu[e])
        rb = _find(parent, ev[e])
        if ra == rb:
            continue
        mst[e] = True
        if ra < rb:
            parent[rb] = ra
            death0[rb] = ew[e]
        else:
            parent[ra] = rb
            death0[ra] = ew[e]

    pair_birth = np.empty(0, dtype=np.int64)
    pair_death = np.empty(0, dtype=np.int64)
    if max_dim >= 1 and count > 0:
        n3 = np.int64(n) * n * n
        pivot_of = Dict.empty(key_type=types.int64, value_type=types.int64)
        stored = List()
        stored.append(np.empty(0, dtype=np.int64))
        pb = np.empty(count, dtype=np.int64)
        pd = np.empty(count, dtype=np.int64)
        npairs = 0
        for e in range(count - 1, -1, -1):
            if mst[e]:
                continue
            a = eu[e]
            b = ev[e]
            key = _min_cofacet(a, b, vrank[e], erank, n, n3)
            if key >= 0 and key not in pivot_of:
                pivot_of[key] = -(e + 1)
                pb[npairs] = e
                pd[npairs] = key
                npairs += 1
                continue
            if key < 0:
                pb[npairs] = e
                pd[npairs] = -1
                npairs += 1
                continue
            # working column as a lazy min-heap of triangle keys; the stored
            # data is the reduction combination (a short edge list)
            heap = np.empty(4 * n + 16, dtype=np.int64)
            size = 0
            for x in _coboundary(a, b, vrank[e], erank, n, n3):
                heap, size = _heap_push(heap, size, x)
            combo = np.array([e], dtype=np.int64)
            while True:
                piv, heap, size = _heap_pivot(heap, size)
                if piv < 0 or piv not in pivot_of:
                    break
                owner = pivot_of[piv]
                if owner < 0:
                    other = np.array([-owner - 1], dtype=np.int64)
                else:
                    other = stored[owner]
                combo = _xor_sorted(combo, other)
                for f in other:
                    for x in _coboundary(eu[f], ev[f], vrank[f], erank, n, n3):
                        heap, size = _heap_push(heap, size, x)
            pb[npairs] = e
            if piv < 0:
                pd[npairs] = -1
            else:
                stored.append(combo)
                pivot_of[piv] = len(stored) - 1
                pd[npairs] = piv
            npairs += 1
        pair_birth = pb[:npairs]
        pair_death = pd[:npairs]
        n3_out = n3
    else:
        n3_out = np.int64(1)

    # deaths as values
    d1 = np.empty(len(pair_birth), dtype=np.float64)
    for t in range(len(pair_birth)):
        if pair_death[t] < 0:
            d1[t] = np.inf
        else:
            d1[t] = rank_values[pair_death[t] // n3_out]
    return death0, ew, pair_birth, d1


def rips_pairs(dist: np.ndarray, threshold: float = math.inf, max_dim: int = 1) -> list:
    """``(dim, birth, death)`` rows ordered by dimension then birth position."""
    n = dist.shape[0]
    if n and float(n) ** 3 * max(n * n, 1) >= 2.0 ** 62:
        raise ValueError(f"{n} points overflow the int64 triangle keys")
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    if n > 1:
        # past the enclosing radius the complex is a cone on its centre, so
        # later edges only add zero-persistence pairs
        threshold = min(float(threshold), float(dist.max(axis=1).min()))
    death0, ew, pb, d1 = _rips_core(dist, float(threshold), int(max_dim))
    rows = [(0, 0.0, float(d)) for d in death0 if d > 0.0]
    if max_dim >= 1:
        order = np.argsort(pb, kind="stable")
        for t in order:
            birth = float(ew[pb[t]])
            death = float(d1[t])
            if death > birth:
                rows.append((1, birth, death))
    return rows
