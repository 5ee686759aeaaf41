"""Independent homology oracles: dense GF(2) ranks and a parity-lifted BFS."""

from __future__ import annotations

from collections import deque

import numpy as np


def gf2_rank(rows: np.ndarray) -> int:
    m = np.array(rows, dtype=bool, copy=True)
    if m.size == 0:
        return 0
    rank = 0
    ncols = m.shape[1]
    for c in range(ncols):
        piv = np.flatnonzero(m[rank:, c])
        if piv.size == 0:
            continue
        p = rank + piv[0]
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        hit = np.flatnonzero(m[:, c])
        hit = hit[hit != rank]
        m[hit] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return rank


def complex_matrices(lat, which):
    """(vertex-edge incidence, 2-cell boundaries) of the relative chain complex."""
    sub = lat.sub(which)
    act = sub.active
    E = sub.n_edges
    d1 = np.zeros((sub.n_vertices, E), dtype=bool)
    for e in np.flatnonzero(act):
        d1[sub.u[e], e] ^= True
        if sub.v[e] >= 0:
            d1[sub.v[e], e] ^= True
    A = lat.graph.A.to_dense().astype(bool)  # n_W x n_B
    if which in ("B", "primal"):
        cells = A & act[None, :]
    else:
        cols = A.T  # primal edge -> its faces
        keep = ~(cols & ~act[None, :]).any(axis=1)
        cells = cols[keep]
    return d1, cells


def h1_dimension(lat, which) -> int:
    d1, d2 = complex_matrices(lat, which)
    E = d1.shape[1]
    nact = int(lat.sub(which).active.sum())
    return (nact - gf2_rank(d1)) - gf2_rank(d2)  # inactive columns are zero in both


def shortest_odd_cycle(lat, which, membrane_edges) -> int:
    """Length of the shortest relative cycle crossing the membrane an odd number of times."""
    sub = lat.sub(which)
    on = np.zeros(sub.n_edges, dtype=bool)
    on[membrane_edges] = True
    V = sub.n_vertices
    best = None
    adj = [[] for _ in range(V)]
    term_edges = [[] for _ in range(V)]
    for e in np.flatnonzero(sub.active):
        a, b = int(sub.u[e]), int(sub.v[e])
        if b >= 0:
            adj[a].append((b, int(on[e])))
            adj[b].append((a, int(on[e])))
        else:
            term_edges[a].append(int(on[e]))
    # closed cycles: BFS on the parity double cover from each vertex
    for s in range(V):
        dist = {(s, 0): 0}
        q = deque([(s, 0)])
        while q:
            x, par = q.popleft()
            dx = dist[(x, par)]
            if best is not None and dx >= best:
                break
            for y, c in adj[x]:
                key = (y, par ^ c)
                if key not in dist:
                    dist[key] = dx + 1
                    q.append(key)
        if (s, 1) in dist:
            best = dist[(s, 1)] if best is None else min(best, dist[(s, 1)])
    # open chains between terminals
    if any(term_edges):
        src = [(v, c) for v in range(V) for c in term_edges[v]]
        dist = {}
        q = deque()
        for v, c in src:
            if (v, c) not in dist:
                dist[(v, c)] = 1
                q.append((v, c))
        while q:
            x, par = q.popleft()
            dx = dist[(x, par)]
            for y, c in adj[x]:
                key = (y, par ^ c)
                if key not in dist:
                    dist[key] = dx + 1
                    q.append(key)
        for v in range(V):
            for c in term_edges[v]:
                key = (v, 1 ^ c)
                if key in dist:
                    L = dist[key] + 1
                    best = L if best is None else min(best, L)
    return best
