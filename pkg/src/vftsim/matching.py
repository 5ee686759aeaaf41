"""Minimum-weight perfect matching of syndrome vertices, with optional boundary partners.

All three solvers take a symmetric integer cost matrix ``w`` over ``n`` flagged
vertices and an optional vector ``b`` of costs for matching a vertex into a
boundary (``None`` when no boundary exists).  They return a list of pairs
``(i, j)``; ``j == -1`` means ``i`` is matched into the boundary.

``subset_dp``
    exact dynamic programming over vertex subsets, ``O(2^n n)``; ties go to
    the lexicographically smallest pairing sequence (lowest unmatched vertex
    first, partners in ascending order, boundary last).
``blossom``
    Edmonds' primal-dual blossom algorithm, ``O(n^3)``; exact, any size.
``greedy``
    repeatedly takes the globally cheapest remaining pair; a heuristic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "CapacityError",
    "EXACT_CAPACITY",
    "subset_dp",
    "blossom",
    "greedy",
    "matching_weight",
    "max_weight_matching",
    "solve",
]

EXACT_CAPACITY = 24
_INF = np.int64(1) << 40


class CapacityError(RuntimeError):
    """The exact matcher was asked for more vertices than it supports."""


def matching_weight(pairs, w: np.ndarray, b: np.ndarray | None) -> int:
    total = 0
    for i, j in pairs:
        total += int(b[i]) if j < 0 else int(w[i, j])
    return total


def _validate(w: np.ndarray, b: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=np.int64)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError("cost matrix must be square")
    if b is None:
        if n % 2:
            raise ValueError(f"odd number ({n}) of flagged vertices and no boundary to absorb one")
        bb = np.full(n, _INF, dtype=np.int64)
    else:
        bb = np.asarray(b, dtype=np.int64)
        if bb.shape != (n,):
            raise ValueError("boundary cost vector has the wrong length")
    return w, bb


# --------------------------------------------------------------------------
# exact subset DP


@njit(cache=True)
def _subset_dp_kernel(w, b):  # pragma: no cover - compiled
    n = w.shape[0]
    size = 1 << n
    inf = np.int64(1) << 40
    f = np.empty(size, dtype=np.int64)
    choice = np.empty(size, dtype=np.int8)
    f[0] = 0
    choice[0] = -2
    for mask in range(1, size):
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ (1 << i)
        best = inf
        bc = -2
        r = rest
        j = i + 1
        r >>= i + 1
        while r:
            if r & 1:
                c = w[i, j] + f[rest ^ (1 << j)]
                if c < best:
                    best = c
                    bc = j
            r >>= 1
            j += 1
        c = b[i] + f[rest]
        if c < best:
            best = c
            bc = -1
        f[mask] = best
        choice[mask] = bc
    return f, choice


def subset_dp(w, b=None, capacity: int = EXACT_CAPACITY) -> list[tuple[int, int]]:
    w, bb = _validate(w, b)
    n = w.shape[0]
    if n == 0:
        return []
    if n > capacity:
        raise CapacityError(f"{n} flagged vertices exceed the exact matcher capacity of {capacity}")
    f, choice = _subset_dp_kernel(w, bb)
    full = (1 << n) - 1
    if f[full] >= _INF:
        raise ValueError("no perfect matching exists")
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        c = int(choice[mask])
        pairs.append((i, c))
        mask ^= 1 << i
        if c >= 0:
            mask ^= 1 << c
    return pairs


# --------------------------------------------------------------------------
# greedy


def greedy(w, b=None) -> list[tuple[int, int]]:
    w, bb = _validate(w, b)
    n = w.shape[0]
    cand = [(int(w[i, j]), i, j) for i in range(n) for j in range(i + 1, n)]
    cand += [(int(bb[i]), i, -1) for i in range(n) if bb[i] < _INF]
    cand.sort(key=lambda t: (t[0], t[1], t[2] if t[2] >= 0 else n))
    used = np.zeros(n, dtype=bool)
    pairs = []
    for _, i, j in cand:
        if used[i] or (j >= 0 and used[j]):
            continue
        used[i] = True
        if j >= 0:
            used[j] = True
        pairs.append((i, j))
    if not used.all():
        raise ValueError("greedy matching left vertices unmatched")
    return sorted(pairs)


# --------------------------------------------------------------------------
# blossom


def max_weight_matching(edges, maxcardinality: bool = False) -> list[int]:
    """Maximum-weight matching of a general graph with integer edge weights.

    ``edges`` is a list of ``(i, j, weight)``.  Returns ``mate`` with
    ``mate[v]`` the partner of ``v`` or ``-1``.  With ``maxcardinality`` the
    result has maximum weight among maximum-cardinality matchings.

    Vertex dual variables ``u``, blossom duals ``z``; an edge is tight when
    its slack ``u_i + u_j - 2 w_ij`` (plus enclosing blossom duals) is zero.
    Weights are doubled internally so all duals stay integral.
    """
    if not edges:
        return []
    nedge = len(edges)
    nvertex = 1 + max(max(i, j) for i, j, _ in edges)
    edges = [(int(i), int(j), 2 * int(wt)) for i, j, wt in edges]
    maxweight = max(0, max(wt for _, _, wt in edges))

    # endpoint p of edge k is edges[k][p % 2]; p ^ 1 is the other end
    endpoint = [edges[p >> 1][p & 1] for p in range(2 * nedge)]
    neighbend: list[list[int]] = [[] for _ in range(nvertex)]
    for k, (i, j, _) in enumerate(edges):
        neighbend[i].append(2 * k + 1)
        neighbend[j].append(2 * k)

    mate = [-1] * nvertex  # remote endpoint index of the matched edge
    label = [0] * (2 * nvertex)  # 0 free, 1 S, 2 T
    labelend = [-1] * (2 * nvertex)
    inblossom = list(range(nvertex))
    blossomparent = [-1] * (2 * nvertex)
    blossomchilds: list = [None] * (2 * nvertex)
    blossombase = list(range(nvertex)) + [-1] * nvertex
    blossomendps: list = [None] * (2 * nvertex)
    bestedge = [-1] * (2 * nvertex)
    blossombestedges: list = [None] * (2 * nvertex)
    unusedblossoms = list(range(nvertex, 2 * nvertex))
    dualvar = [maxweight] * nvertex + [0] * nvertex
    allowedge = [False] * nedge
    queue: list[int] = []

    def slack(k):
        i, j, wt = edges[k]
        return dualvar[i] + dualvar[j] - 2 * wt

    def leaves(b):
        if b < nvertex:
            yield b
            return
        stack = [b]
        while stack:
            t = stack.pop()
            if t < nvertex:
                yield t
            else:
                stack.extend(reversed(blossomchilds[t]))

    def assign_label(w, t, p):
        while True:
            b = inblossom[w]
            label[w] = label[b] = t
            labelend[w] = labelend[b] = p
            bestedge[w] = bestedge[b] = -1
            if t == 1:
                queue.extend(leaves(b))
                return
            base = blossombase[b]
            w, t, p = endpoint[mate[base]], 1, mate[base] ^ 1

    def scan_blossom(v, w):
        # walk up from v and w alternately; the first blossom seen twice is the base
        path = []
        base = -1
        while v != -1 or w != -1:
            b = inblossom[v]
            if label[b] & 4:
                base = blossombase[b]
                break
            path.append(b)
            label[b] = 5
            if labelend[b] == -1:
                v = -1
            else:
                v = endpoint[labelend[b]]
                b = inblossom[v]
                v = endpoint[labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            label[b] = 1
        return base

    def add_blossom(base, k):
        v, w, _ = edges[k]
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        b = unusedblossoms.pop()
        blossombase[b] = base
        blossomparent[b] = -1
        blossomparent[bb] = b
        path = []
        endps = []
        while bv != bb:
            blossomparent[bv] = b
            path.append(bv)
            endps.append(labelend[bv])
            v = endpoint[labelend[bv]]
            bv = inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            blossomparent[bw] = b
            path.append(bw)
            endps.append(labelend[bw] ^ 1)
            w = endpoint[labelend[bw]]
            bw = inblossom[w]
        blossomchilds[b] = path
        blossomendps[b] = endps
        label[b] = 1
        labelend[b] = labelend[bb]
        dualvar[b] = 0
        for v in leaves(b):
            if label[inblossom[v]] == 2:
                queue.append(v)
            inblossom[v] = b
        bestedgeto = {}
        for bv in path:
            if blossombestedges[bv] is None:
                nblist = [p >> 1 for v in leaves(bv) for p in neighbend[v]]
            else:
                nblist = blossombestedges[bv]
            for k2 in nblist:
                i, j, _ = edges[k2]
                if inblossom[j] == b:
                    i, j = j, i
                bj = inblossom[j]
                if bj != b and label[bj] == 1:
                    cur = bestedgeto.get(bj, -1)
                    if cur == -1 or slack(k2) < slack(cur):
                        bestedgeto[bj] = k2
            blossombestedges[bv] = None
            bestedge[bv] = -1
        blossombestedges[b] = list(bestedgeto.values())
        best = -1
        for k2 in blossombestedges[b]:
            if best == -1 or slack(k2) < slack(best):
                best = k2
        bestedge[b] = best

    def expand_blossom(b, endstage):
        for s in blossomchilds[b]:
            blossomparent[s] = -1
            if s < nvertex:
                inblossom[s] = s
            elif endstage and dualvar[s] == 0:
                expand_blossom(s, endstage)
            else:
                for v in leaves(s):
                    inblossom[v] = s
        if not endstage and label[b] == 2:
            # relabel the even-length path through the expanded blossom
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = blossomchilds[b].index(entrychild)
            if j & 1:
                j -= len(blossomchilds[b])
                jstep, endptrick = 1, 0
            else:
                jstep, endptrick = -1, 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[blossomendps[b][j - endptrick] ^ endptrick ^ 1]] = 0
                assign_label(endpoint[p ^ 1], 2, p)
                allowedge[blossomendps[b][j - endptrick] >> 1] = True
                j += jstep
                p = blossomendps[b][j - endptrick] ^ endptrick
                allowedge[p >> 1] = True
                j += jstep
            bv = blossomchilds[b][j]
            label[endpoint[p ^ 1]] = label[bv] = 2
            labelend[endpoint[p ^ 1]] = labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while blossomchilds[b][j] != entrychild:
                bv = blossomchilds[b][j]
                if label[bv] == 1:
                    j += jstep
                    continue
                found = -1
                for v in leaves(bv):
                    if label[v] != 0:
                        found = v
                        break
                if found >= 0:
                    label[found] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    assign_label(found, 2, labelend[found])
                j += jstep
        label[b] = labelend[b] = -1
        blossomchilds[b] = blossomendps[b] = None
        blossombase[b] = -1
        blossombestedges[b] = None
        bestedge[b] = -1
        unusedblossoms.append(b)

    def augment_blossom(b, v):
        t = v
        while blossomparent[t] != b:
            t = blossomparent[t]
        if t >= nvertex:
            augment_blossom(t, v)
        i = j = blossomchilds[b].index(t)
        if i & 1:
            j -= len(blossomchilds[b])
            jstep, endptrick = 1, 0
        else:
            jstep, endptrick = -1, 1
        while j != 0:
            j += jstep
            t = blossomchilds[b][j]
            p = blossomendps[b][j - endptrick] ^ endptrick
            if t >= nvertex:
                augment_blossom(t, endpoint[p])
            j += jstep
            t = blossomchilds[b][j]
            if t >= nvertex:
                augment_blossom(t, endpoint[p ^ 1])
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        blossomchilds[b] = blossomchilds[b][i:] + blossomchilds[b][:i]
        blossomendps[b] = blossomendps[b][i:] + blossomendps[b][:i]
        blossombase[b] = blossombase[blossomchilds[b][0]]

    def augment_matching(k):
        v, w, _ = edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = inblossom[s]
                if bs >= nvertex:
                    augment_blossom(bs, s)
                mate[s] = p
                if labelend[bs] == -1:
                    break
                t = endpoint[labelend[bs]]
                bt = inblossom[t]
                s = endpoint[labelend[bt]]
                j = endpoint[labelend[bt] ^ 1]
                if bt >= nvertex:
                    augment_blossom(bt, j)
                mate[j] = labelend[bt]
                p = labelend[bt] ^ 1

    for _stage in range(nvertex):
        label[:] = [0] * (2 * nvertex)
        bestedge[:] = [-1] * (2 * nvertex)
        blossombestedges[nvertex:] = [None] * nvertex
        allowedge[:] = [False] * nedge
        queue[:] = []
        for v in range(nvertex):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                assign_label(v, 1, -1)
        augmented = False
        while True:
            while queue and not augmented:
                v = queue.pop()
                for p in neighbend[v]:
                    k = p >> 1
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = slack(k)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        lw = label[inblossom[w]]
                        if lw == 0:
                            assign_label(w, 2, p ^ 1)
                        elif lw == 1:
                            base = scan_blossom(v, w)
                            if base >= 0:
                                add_blossom(base, k)
                            else:
                                augment_matching(k)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < slack(bestedge[b]):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break

            # dual update
            deltatype = -1
            delta = deltaedge = deltablossom = None
            if not maxcardinality:
                deltatype = 1
                delta = min(dualvar[:nvertex])
            for v in range(nvertex):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    dd = slack(bestedge[v])
                    if deltatype == -1 or dd < delta:
                        delta, deltatype, deltaedge = dd, 2, bestedge[v]
            for b in range(2 * nvertex):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    dd = slack(bestedge[b]) // 2
                    if deltatype == -1 or dd < delta:
                        delta, deltatype, deltaedge = dd, 3, bestedge[b]
            for b in range(nvertex, 2 * nvertex):
                if (
                    blossombase[b] >= 0
                    and blossomparent[b] == -1
                    and label[b] == 2
                    and (deltatype == -1 or dualvar[b] < delta)
                ):
                    delta, deltatype, deltablossom = dualvar[b], 4, b
            if deltatype == -1:
                deltatype = 1
                delta = max(0, min(dualvar[:nvertex]))

            for v in range(nvertex):
                lv = label[inblossom[v]]
                if lv == 1:
                    dualvar[v] -= delta
                elif lv == 2:
                    dualvar[v] += delta
            for b in range(nvertex, 2 * nvertex):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta

            if deltatype == 1:
                break
            if deltatype == 2:
                allowedge[deltaedge] = True
                i, j, _ = edges[deltaedge]
                if label[inblossom[i]] == 0:
                    i, j = j, i
                queue.append(i)
            elif deltatype == 3:
                allowedge[deltaedge] = True
                i, j, _ = edges[deltaedge]
                queue.append(i)
            else:
                expand_blossom(deltablossom, False)

        if not augmented:
            break
        for b in range(nvertex, 2 * nvertex):
            if blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1 and dualvar[b] == 0:
                expand_blossom(b, True)

    return [endpoint[m] if m >= 0 else -1 for m in mate]


def blossom(w, b=None) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching through :func:`max_weight_matching`.

    Boundary partners are modelled by one private boundary copy per vertex;
    copies are joined to each other at zero cost.
    """
    w, bb = _validate(w, b)
    n = w.shape[0]
    if n == 0:
        return []
    use_boundary = bool((bb < _INF).any())
    edges = [(i, j, int(w[i, j])) for i in range(n) for j in range(i + 1, n) if w[i, j] < _INF]
    if use_boundary:
        edges += [(i, n + i, int(bb[i])) for i in range(n) if bb[i] < _INF]
        edges += [(n + i, n + j, 0) for i in range(n) for j in range(i + 1, n)]
    top = max(wt for _, _, wt in edges) + 1
    mate = max_weight_matching([(i, j, top - wt) for i, j, wt in edges], maxcardinality=True)
    pairs = []
    for i in range(n):
        m = mate[i] if i < len(mate) else -1
        if m < 0:
            raise ValueError("no perfect matching exists")
        if m >= n:
            pairs.append((i, -1))
        elif i < m:
            pairs.append((i, m))
    return pairs


SOLVERS = {
    "exact_subset_dp": subset_dp,
    "exact": subset_dp,
    "blossom": blossom,
    "greedy": greedy,
}


def solve(method: str, w, b=None) -> list[tuple[int, int]]:
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown matching backend {method!r}") from None
    return fn(w, b)
