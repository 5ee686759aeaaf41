"""Three-dimensional cluster-state geometry with defect tubes and singular sites.

Coordinates are doubled integers.  Primal vertices sit at all-even points,
primal edges (black qubits) at points with exactly one odd coordinate, primal
faces = dual edges (white qubits) at points with exactly two odd coordinates,
and dual vertices (cube centres) at all-odd points.  A white qubit is joined
in the graph state to the four black qubits bounding its face.

Defect tubes remove syndrome from both sublattices but act differently on
the two of them.  On the primal lattice a tube is a set of vertices on which
chains may terminate, so primal chains joining two tubes are logical errors.
On the dual lattice a tube is a hole that chains must go around, so dual
loops encircling a tube are logical errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from collections import deque
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .f2core import GraphState

__all__ = [
    "DefectTube",
    "LatticeSpec",
    "LatticeSpecError",
    "LogicalMembrane",
    "SingularSite",
    "Sublattice",
    "ClusterLattice",
    "Geodesic",
    "build",
    "geodesic_distance",
    "membrane_parity",
    "shortest_logical_chain",
    "empty_vacuum",
    "fig2_pair",
    "layout_spec",
    "dump",
    "LAYOUTS",
]

PERIODIC = "periodic"
OPEN = "open"

ROLE_VACUUM = 0
ROLE_DEFECT = 1
ROLE_SINGULAR = 2
ROLE_NAMES = ("vacuum", "defect", "singular")

# neighbour priority: +x, -x, +y, -y, +z, -z
DIRECTIONS = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))

UNREACHABLE = np.iinfo(np.int32).max // 4


class LatticeSpecError(ValueError):
    """A lattice specification violates a geometric invariant."""


@dataclass(frozen=True)
class DefectTube:
    """Connected, axis-aligned sequence of unit cells of cross-section ``width``.

    Each anchor cell ``c`` claims the primal vertices ``c + {0..width}^3``.
    """

    cells: tuple[tuple[int, int, int], ...]
    width: int = 1

    @classmethod
    def straight(cls, axis: int, origin: Sequence[int], length: int, width: int = 1) -> DefectTube:
        cells = []
        for i in range(length):
            c = list(origin)
            c[axis] += i
            cells.append(tuple(c))
        return cls(tuple(cells), width)

    def axis(self) -> int | None:
        """The axis of a straight tube, ``None`` for bent or single-cell tubes."""
        if len(self.cells) < 2:
            return None
        arr = np.array(self.cells)
        varying = [a for a in range(3) if len(set(arr[:, a])) > 1]
        return varying[0] if len(varying) == 1 else None


@dataclass(frozen=True)
class LatticeSpec:
    L_x: int
    L_y: int
    L_z: int
    d: int
    boundary: str = PERIODIC
    defect_layout: tuple[DefectTube, ...] = ()
    singular_sites: tuple[tuple[int, int, int], ...] = ()
    layout: str = "custom"

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.L_x, self.L_y, self.L_z)


class LogicalMembrane(NamedTuple):
    """Edge set (qubit indices of one colour) detecting one logical class by odd overlap."""

    name: str
    sublattice: str
    edges: np.ndarray


@dataclass(frozen=True)
class SingularSite:
    """A singular (XY-measured) black qubit and its sub-distance correction region."""

    coord: tuple[int, int, int]
    qubit: int
    region: dict
    local_membrane: dict


class Geodesic(NamedTuple):
    length: int
    v1_boundary: int | None
    v2_boundary: int | None


@dataclass(eq=False)
class Sublattice:
    """Decoding graph of one colour.

    Vertices are the syndrome-bearing (vacuum) vertices only.  Every active
    (non-defect) edge has a vacuum vertex in ``u`` and either a second vacuum
    vertex in ``v`` or ``v == -1`` and a terminal index in ``term``.
    """

    name: str
    color: str
    vertex_coords: np.ndarray
    edge_coords: np.ndarray
    active: np.ndarray
    u: np.ndarray
    v: np.ndarray
    term: np.ndarray
    terminals: tuple[str, ...]
    nbr_edge: np.ndarray
    nbr_vert: np.ndarray
    dist: np.ndarray
    term_dist: np.ndarray
    removed_coords: np.ndarray
    membranes: list = field(default_factory=list)

    def __post_init__(self):
        self._vindex = {tuple(c): i for i, c in enumerate(self.vertex_coords.tolist())}
        self.active_edges = np.flatnonzero(self.active)
        inner = self.active & (self.v >= 0)
        self._inner_edges = np.flatnonzero(inner)
        self._term_edges = np.flatnonzero(self.active & (self.v < 0))
        self.boundary_dist = (
            self.term_dist.min(axis=1) if self.term_dist.shape[1] else np.full(self.n_vertices, UNREACHABLE)
        )

    @property
    def n_vertices(self) -> int:
        return self.vertex_coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_coords.shape[0]

    def vertex_index(self, coord: Sequence[int]) -> int:
        try:
            return self._vindex[tuple(int(c) for c in coord)]
        except KeyError:
            raise ValueError(f"{tuple(coord)} is not a vacuum vertex of the {self.name} lattice") from None

    def boundary(self, chain: np.ndarray) -> np.ndarray:
        """Vacuum-vertex boundary (bool mask) of an edge chain given as a bool mask."""
        chain = np.asarray(chain, dtype=bool) & self.active
        idx = np.flatnonzero(chain)
        ends = np.concatenate([self.u[idx], self.v[idx]])
        ends = ends[ends >= 0]
        counts = np.bincount(ends, minlength=self.n_vertices)
        return (counts & 1).astype(bool)

    def neighbours(self, vertex: int) -> list[tuple[int, int]]:
        """``(edge, other_end)`` in axis priority order; terminals are ``-2 - t``."""
        return [
            (int(e), int(w))
            for e, w in zip(self.nbr_edge[vertex], self.nbr_vert[vertex])
            if e >= 0
        ]

    def path(self, a: int, b: int) -> list[int]:
        """Deterministic geodesic (edge ids) between vacuum vertices ``a`` and ``b``."""
        if self.dist[a, b] >= UNREACHABLE:
            raise ValueError(f"vertices {a} and {b} are disconnected")
        out = []
        cur = a
        dist_b = self.dist[:, b]
        while cur != b:
            want = dist_b[cur] - 1
            for e, w in zip(self.nbr_edge[cur], self.nbr_vert[cur]):
                if e >= 0 and w >= 0 and dist_b[w] == want:
                    out.append(int(e))
                    cur = w
                    break
            else:  # pragma: no cover - dist matrix is inconsistent
                raise RuntimeError("geodesic walk stalled")
        return out

    def path_to_terminal(self, a: int, t: int | None = None) -> list[int]:
        """Geodesic from ``a`` into terminal ``t`` (nearest terminal when ``None``)."""
        if t is None:
            t = int(np.argmin(self.term_dist[a]))
        td = self.term_dist[:, t]
        if td[a] >= UNREACHABLE:
            raise ValueError(f"vertex {a} cannot reach terminal {t}")
        out = []
        cur = a
        while True:
            if td[cur] == 1:
                for e, w in zip(self.nbr_edge[cur], self.nbr_vert[cur]):
                    if e >= 0 and w == -2 - t:
                        out.append(int(e))
                        return out
            want = td[cur] - 1
            for e, w in zip(self.nbr_edge[cur], self.nbr_vert[cur]):
                if e >= 0 and w >= 0 and td[w] == want:
                    out.append(int(e))
                    cur = w
                    break
            else:  # pragma: no cover
                raise RuntimeError("terminal walk stalled")


@dataclass(eq=False)
class ClusterLattice:
    spec: LatticeSpec
    primal: Sublattice
    dual: Sublattice
    graph: GraphState
    role: np.ndarray
    singular: list[SingularSite]

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_B(self) -> int:
        return self.graph.n_B

    @property
    def n_W(self) -> int:
        return self.graph.n_W

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def membranes(self) -> list[LogicalMembrane]:
        return self.primal.membranes + self.dual.membranes

    def sub(self, which: str) -> Sublattice:
        if which in ("B", "primal"):
            return self.primal
        if which in ("W", "dual"):
            return self.dual
        raise ValueError(f"unknown sublattice {which!r}")

    def color_roles(self, color: str) -> np.ndarray:
        return self.role[: self.n_B] if color == "B" else self.role[self.n_B :]


# --------------------------------------------------------------------------
# construction


def _validate(spec: LatticeSpec) -> None:
    if spec.d < 2:
        raise LatticeSpecError("code distance must be at least 2")
    if spec.boundary not in (PERIODIC, OPEN):
        raise LatticeSpecError(f"unknown boundary {spec.boundary!r}")
    if min(spec.dims) < 1:
        raise LatticeSpecError("lattice needs at least one cell per axis")
    for t in spec.defect_layout:
        if t.width < 1:
            raise LatticeSpecError("defect tube width must be at least 1")
        if not t.cells:
            raise LatticeSpecError("defect tube has no cells")
        for a, b in zip(t.cells, t.cells[1:]):
            if sum(abs(x - y) for x, y in zip(a, b)) != 1:
                raise LatticeSpecError("defect tube cells must form a connected axis-aligned path")
        # the shortest loop around a straight tube of this width
        if 4 * (t.width + 1) < spec.d:
            raise LatticeSpecError(
                f"tube circumference {4 * (t.width + 1)} is below the code distance {spec.d}"
            )
        for c in t.cells:
            for a in range(3):
                lo, hi = c[a], c[a] + t.width
                if spec.boundary == OPEN and (lo < 0 or hi > spec.dims[a]):
                    raise LatticeSpecError("defect tube leaves the lattice volume")
                if spec.boundary == PERIODIC and t.width >= spec.dims[a]:
                    raise LatticeSpecError("defect tube wider than the periodic lattice")


def _tube_vertices(spec: LatticeSpec, tube: DefectTube) -> set[tuple[int, int, int]]:
    out = set()
    w = tube.width
    for c in tube.cells:
        for i in range(w + 1):
            for j in range(w + 1):
                for k in range(w + 1):
                    p = (c[0] + i, c[1] + j, c[2] + k)
                    if spec.boundary == PERIODIC:
                        p = tuple(x % L for x, L in zip(p, spec.dims))
                    out.add(p)
    return out


def _set_distance(spec: LatticeSpec, a: np.ndarray, b: np.ndarray) -> int:
    diff = np.abs(a[:, None, :] - b[None, :, :])
    if spec.boundary == PERIODIC:
        L = np.array(spec.dims)
        diff = np.minimum(diff, L - diff)
    return int(diff.sum(axis=2).min())


def _self_wrap_gap(spec: LatticeSpec, verts: np.ndarray) -> int:
    """Shortest primal path leaving a tube and re-entering it around the torus."""
    gaps = []
    for a, L in enumerate(spec.dims):
        occupied = sorted(set(verts[:, a].tolist()))
        if len(occupied) == L:
            continue
        occ = np.zeros(L, dtype=bool)
        occ[occupied] = True
        best = L
        for start in occupied:
            step = 1
            while not occ[(start + step) % L]:
                step += 1
            if step > 1:
                best = min(best, step)
        gaps.append(best)
    return min(gaps) if gaps else math.inf


def build(spec: LatticeSpec) -> ClusterLattice:
    """Construct the cluster lattice, its graph state, roles, geodesics and membranes."""
    _validate(spec)
    periodic = spec.boundary == PERIODIC
    L = np.array(spec.dims)

    # defects ---------------------------------------------------------------
    defect_of: dict[tuple[int, int, int], int] = {}
    tube_verts = []
    for ti, tube in enumerate(spec.defect_layout):
        verts = _tube_vertices(spec, tube)
        for p in verts:
            if p in defect_of:
                raise LatticeSpecError(f"defect tubes {defect_of[p]} and {ti} overlap")
            defect_of[p] = ti
        tube_verts.append(np.array(sorted(verts)))
    for i in range(len(tube_verts)):
        if periodic:
            gap = _self_wrap_gap(spec, tube_verts[i])
            if gap < spec.d:
                raise LatticeSpecError(f"tube {i} is only {gap} edges from its periodic image")
        for j in range(i + 1, len(tube_verts)):
            sep = _set_distance(spec, tube_verts[i], tube_verts[j])
            if sep < spec.d:
                raise LatticeSpecError(f"tubes {i} and {j} are separated by {sep} < d = {spec.d}")

    # primal lattice ----------------------------------------------------------
    nv = L if periodic else L + 1
    pv_coords = [tuple(p) for p in np.ndindex(*nv)]
    primal_edges = []  # (doubled centre, endpoint a, endpoint b) in cell coords
    for p in pv_coords:
        for a in range(3):
            if not periodic and p[a] >= L[a]:
                continue
            q = list(p)
            q[a] += 1
            if periodic:
                q[a] %= L[a]
            centre = [2 * x for x in p]
            centre[a] += 1
            primal_edges.append((tuple(centre), p, tuple(q)))
    primal_edges.sort()
    n_B = len(primal_edges)
    pcentre_index = {e[0]: i for i, e in enumerate(primal_edges)}

    # dual lattice (cubes and faces) ---------------------------------------------
    cube_coords = [tuple(c) for c in np.ndindex(*L)]
    removed_cube: dict[tuple[int, int, int], int] = {}
    if defect_of:
        for c in cube_coords:
            owners = set()
            for off in np.ndindex(2, 2, 2):
                p = tuple(int(x + o) for x, o in zip(c, off))
                if periodic:
                    p = tuple(x % l for x, l in zip(p, L))
                owners.add(defect_of.get(p, -1))
            if len(owners) == 1 and -1 not in owners:
                removed_cube[c] = owners.pop()

    faces = []  # (doubled centre, cube a or None, cube b or None)
    nf = [L.copy() for _ in range(3)]
    for a in range(3):
        if not periodic:
            nf[a][a] = L[a] + 1
        for f in np.ndindex(*nf[a]):
            centre = [2 * x + 1 for x in f]
            centre[a] = 2 * f[a]
            lo = list(f)
            lo[a] -= 1
            hi = list(f)
            if periodic:
                lo[a] %= L[a]
                ca, cb = tuple(lo), tuple(hi)
            else:
                ca = tuple(lo) if lo[a] >= 0 else None
                cb = tuple(hi) if hi[a] < L[a] else None
            faces.append((tuple(centre), ca, cb))
    faces.sort()
    n_W = len(faces)

    # graph state: face -> its four boundary edges ---------------------------------
    graph_edges = []
    mod2L = 2 * L
    for wi, (centre, _, _) in enumerate(faces):
        perp = next(a for a in range(3) if centre[a] % 2 == 0)
        for b in range(3):
            if b == perp:
                continue
            for s in (-1, 1):
                ec = list(centre)
                ec[b] += s
                if periodic:
                    ec = [x % m for x, m in zip(ec, mod2L)]
                graph_edges.append((pcentre_index[tuple(ec)], wi))
    graph = GraphState.from_edges(n_B, n_W, graph_edges)

    # roles -----------------------------------------------------------------------
    role = np.zeros(n_B + n_W, dtype=np.int8)
    p_terminal = np.full(n_B, -1, dtype=np.int64)
    for i, (_, a, b) in enumerate(primal_edges):
        ta, tb = defect_of.get(a, -1), defect_of.get(b, -1)
        if ta >= 0 and tb >= 0:
            if ta != tb:
                raise LatticeSpecError("an edge joins two different defect tubes")
            role[i] = ROLE_DEFECT
        elif ta >= 0 or tb >= 0:
            p_terminal[i] = max(ta, tb)
    d_terminal = np.full(n_W, -1, dtype=np.int64)
    for i, (_, ca, cb) in enumerate(faces):
        if (ca is not None and ca in removed_cube) or (cb is not None and cb in removed_cube):
            role[n_B + i] = ROLE_DEFECT
        elif ca is None or cb is None:
            if ca is None and cb is None:
                role[n_B + i] = ROLE_DEFECT
            else:
                d_terminal[i] = 0

    # singular sites ------------------------------------------------------------------
    singular_qubits = []
    for site in spec.singular_sites:
        centre = (2 * site[0] + 1, 2 * site[1], 2 * site[2])
        if periodic:
            centre = tuple(x % m for x, m in zip(centre, mod2L))
        if centre not in pcentre_index:
            raise LatticeSpecError(f"singular site {site} is not a primal x-edge of the lattice")
        qi = pcentre_index[centre]
        if role[qi] == ROLE_DEFECT or p_terminal[qi] >= 0:
            raise LatticeSpecError(f"singular site {site} must lie in the vacuum between defects")
        if role[qi] == ROLE_SINGULAR:
            raise LatticeSpecError(f"singular site {site} listed twice")
        role[qi] = ROLE_SINGULAR
        singular_qubits.append((tuple(site), qi, centre))

    # sublattices ---------------------------------------------------------------------
    primal = _make_sublattice(
        "primal", "B", periodic, L,
        vertex_cells=[p for p in pv_coords if p not in defect_of],
        vertex_doubled=lambda p: tuple(2 * x for x in p),
        edges=[(c, a if a not in defect_of else None, b if b not in defect_of else None)
               for c, a, b in primal_edges],
        active=role[:n_B] != ROLE_DEFECT,
        terminal=p_terminal,
        terminal_names=tuple(f"tube{i}" for i in range(len(spec.defect_layout))),
        removed=[tuple(2 * x for x in p) for p in sorted(defect_of)],
    )
    dual = _make_sublattice(
        "dual", "W", periodic, L,
        vertex_cells=[c for c in cube_coords if c not in removed_cube],
        vertex_doubled=lambda c: tuple(2 * x + 1 for x in c),
        edges=[(c, a if a not in removed_cube else None, b if b not in removed_cube else None)
               for c, a, b in faces],
        active=role[n_B:] != ROLE_DEFECT,
        terminal=d_terminal,
        terminal_names=("boundary",) if not periodic else (),
        removed=[tuple(2 * x + 1 for x in c) for c in sorted(removed_cube)],
    )

    primal.membranes = _primal_membranes(spec, primal, tube_verts)
    dual.membranes = _dual_membranes(spec, dual)

    singular = [
        _singular_site(spec, primal, dual, coord, qi, centre) for coord, qi, centre in singular_qubits
    ]
    return ClusterLattice(spec, primal, dual, graph, role, singular)


def _make_sublattice(name, color, periodic, L, vertex_cells, vertex_doubled, edges,
                     active, terminal, terminal_names, removed) -> Sublattice:
    vindex = {c: i for i, c in enumerate(vertex_cells)}
    V = len(vertex_cells)
    E = len(edges)
    u = np.full(E, -1, dtype=np.int64)
    v = np.full(E, -1, dtype=np.int64)
    term = np.full(E, -1, dtype=np.int64)
    edge_coords = np.array([e[0] for e in edges], dtype=np.int64).reshape(E, 3)
    nbr_edge = np.full((V, 6), -1, dtype=np.int64)
    nbr_vert = np.full((V, 6), -1, dtype=np.int64)
    mod2L = 2 * L
    vcoords = np.array([vertex_doubled(c) for c in vertex_cells], dtype=np.int64).reshape(V, 3)

    for i, (centre, a, b) in enumerate(edges):
        if not active[i]:
            continue
        ia = vindex.get(a) if a is not None else None
        ib = vindex.get(b) if b is not None else None
        ends = [x for x in (ia, ib) if x is not None]
        if not ends:  # pragma: no cover - filtered by roles
            continue
        u[i] = ends[0]
        if len(ends) == 2:
            v[i] = ends[1]
        else:
            term[i] = terminal[i]
        vpar = 0 if color == "B" else 1
        axis = next(k for k in range(3) if centre[k] % 2 != vpar)
        for end in ends:
            other = -1
            if len(ends) == 2:
                other = ends[1] if end == ends[0] else ends[0]
            else:
                other = -2 - term[i]
            delta = centre[axis] - vcoords[end][axis]
            if periodic:
                delta = (delta + 1) % mod2L[axis] - 1
            slot = 2 * axis + (0 if delta > 0 else 1)
            nbr_edge[end, slot] = i
            nbr_vert[end, slot] = other

    inner = np.flatnonzero(active & (v >= 0))
    if V:
        adj = coo_matrix(
            (np.ones(2 * inner.size), (np.r_[u[inner], v[inner]], np.r_[v[inner], u[inner]])),
            shape=(V, V),
        ).tocsr()
        raw = shortest_path(adj, method="D", unweighted=True)
        dist = np.where(np.isfinite(raw), raw, UNREACHABLE).astype(np.int32)
    else:
        dist = np.zeros((0, 0), dtype=np.int32)

    T = len(terminal_names)
    term_dist = np.full((V, T), UNREACHABLE, dtype=np.int32)
    for t in range(T):
        starts = np.unique(u[active & (v < 0) & (term == t)])
        if starts.size:
            term_dist[:, t] = dist[:, starts].min(axis=1) + 1
    term_dist = np.minimum(term_dist, UNREACHABLE)

    return Sublattice(
        name=name,
        color=color,
        vertex_coords=vcoords,
        edge_coords=edge_coords,
        active=np.asarray(active, dtype=bool),
        u=u,
        v=v,
        term=term,
        terminals=terminal_names,
        nbr_edge=nbr_edge,
        nbr_vert=nbr_vert,
        dist=dist,
        term_dist=term_dist,
        removed_coords=np.array(removed, dtype=np.int64).reshape(-1, 3),
    )


def _free_column(spec: LatticeSpec, axis: int, tube_verts: list[np.ndarray]) -> int | None:
    """A cell column ``c`` along ``axis`` whose edges c->c+1 touch no tube vertex."""
    L = spec.dims[axis]
    occupied = set()
    for verts in tube_verts:
        occupied.update(verts[:, axis].tolist())
    candidates = [c for c in range(L) if c not in occupied and (c + 1) % L not in occupied]
    if not candidates:
        return None
    # the column furthest from any tube keeps the plane well inside the vacuum
    if not occupied:
        return 0

    def clearance(c):
        return min(min(abs(c - o), L - abs(c - o)) for o in occupied)

    return max(candidates, key=lambda c: (clearance(c), -c))


def _primal_membranes(spec: LatticeSpec, sub: Sublattice, tube_verts) -> list[LogicalMembrane]:
    out = []
    ntubes = len(spec.defect_layout)
    # chains between tubes: odd number of endpoints on tube i
    for t in range(ntubes - 1):
        edges = np.flatnonzero(sub.active & (sub.term == t))
        out.append(LogicalMembrane(f"connect:tube{t}", "primal", edges))
    if spec.boundary == PERIODIC:
        for axis, label in enumerate("xyz"):
            col = _free_column(spec, axis, tube_verts)
            if col is None:
                continue
            sel = sub.active & (sub.edge_coords[:, axis] == 2 * col + 1)
            out.append(LogicalMembrane(f"torus_{label}", "primal", np.flatnonzero(sel)))
    return out


def _dual_membranes(spec: LatticeSpec, sub: Sublattice) -> list[LogicalMembrane]:
    out = []
    tubes = spec.defect_layout
    if spec.boundary != PERIODIC:
        # loops around tubes are relative boundaries once chains may end on the outer boundary
        return out
    axes = {t.axis() for t in tubes}
    if len(tubes) >= 2 and len(axes) == 1 and None not in axes:
        axis = axes.pop()
        trans = [a for a in range(3) if a != axis]
        # order tubes along the first transverse axis; strips run along it at the
        # second transverse coordinate through the tube interiors
        first, second = trans
        order = sorted(range(len(tubes)), key=lambda i: tubes[i].cells[0][first])
        base = {tubes[i].cells[0][second] for i in order}
        if len(base) == 1:
            y0 = base.pop()
            strip_coord = 2 * y0 + 2
            for a, b in zip(order, order[1:]):
                ta, tb = tubes[a], tubes[b]
                lo = 2 * (ta.cells[0][first] + ta.width)  # primal plane bounding tube a
                hi = 2 * tb.cells[0][first]
                sel = (
                    sub.active
                    & (sub.edge_coords[:, second] == strip_coord)
                    & (sub.edge_coords[:, first] > lo)
                    & (sub.edge_coords[:, first] < hi)
                )
                out.append(LogicalMembrane(f"wrap:tube{a}-tube{b}", "dual", np.flatnonzero(sel)))
    occupied_sets = [
        {c[a] + i for tube in tubes for c in tube.cells for i in range(tube.width + 1)} for a in range(3)
    ]
    for axis, label in enumerate("xyz"):
        Lax = spec.dims[axis]
        occ = occupied_sets[axis]
        free = [c for c in range(Lax) if c % Lax not in occ] or list(range(Lax))
        col = free[0]
        sel = sub.active & (sub.edge_coords[:, axis] == 2 * col)
        # dual edges along `axis` have an even coordinate there
        out.append(LogicalMembrane(f"torus_{label}", "dual", np.flatnonzero(sel)))
    return out


def _periodic_delta(a: np.ndarray, b: Sequence[int], spec: LatticeSpec) -> np.ndarray:
    diff = np.abs(a - np.asarray(b))
    if spec.boundary == PERIODIC:
        m = 2 * np.array(spec.dims)
        diff = np.minimum(diff, m - diff)
    return diff


def _singular_site(spec, primal: Sublattice, dual: Sublattice, coord, qubit, centre) -> SingularSite:
    radius = 2 * math.ceil(spec.d / 2)
    region = {}
    local = {}
    for sub, plane in ((primal, centre[0]), (dual, centre[0] + 1)):
        delta = _periodic_delta(sub.edge_coords, centre, spec)
        inside = sub.active & (delta.max(axis=1) <= radius)
        plane_c = plane % (2 * spec.L_x) if spec.boundary == PERIODIC else plane
        # the local cut: edges along x crossing the plane through the site
        along_x = (sub.edge_coords[:, 0] - (1 if sub.color == "B" else 0)) % 2 == 0
        crossing = inside & along_x & (sub.edge_coords[:, 0] == plane_c)
        region[sub.color] = np.flatnonzero(inside)
        local[sub.color] = np.flatnonzero(crossing)
    return SingularSite(coord, qubit, region, local)


# --------------------------------------------------------------------------
# queries


def _classify_vertex(lat: ClusterLattice, coord: Sequence[int]) -> Sublattice:
    parities = {int(c) % 2 for c in coord}
    if parities == {0}:
        return lat.primal
    if parities == {1}:
        return lat.dual
    raise ValueError(f"{tuple(coord)} is not a lattice vertex")


def geodesic_distance(lat: ClusterLattice, v1: Sequence[int], v2: Sequence[int]) -> Geodesic:
    """Shortest vacuum path between two vertices given in doubled coordinates.

    Defect-region vertices are not traversable.  On open lattices the distance
    of each vertex to the nearest outer-boundary terminal is reported too.
    """
    s1, s2 = _classify_vertex(lat, v1), _classify_vertex(lat, v2)
    if s1 is not s2:
        raise ValueError("vertices lie on different sublattices")
    i, j = s1.vertex_index(v1), s1.vertex_index(v2)
    length = int(s1.dist[i, j])
    if length >= UNREACHABLE:
        raise ValueError("vertices are not connected through the vacuum")
    b1 = b2 = None
    if lat.spec.boundary == OPEN and "boundary" in s1.terminals:
        t = s1.terminals.index("boundary")
        b1, b2 = int(s1.term_dist[i, t]), int(s1.term_dist[j, t])
    return Geodesic(length, b1, b2)


def _as_mask(sub: Sublattice, chain) -> np.ndarray:
    chain = np.asarray(chain)
    if chain.dtype == bool:
        if chain.shape != (sub.n_edges,):
            raise ValueError("chain mask has the wrong length")
        return chain
    mask = np.zeros(sub.n_edges, dtype=bool)
    np.logical_xor.at(mask, chain.astype(np.int64), True)
    return mask


def membrane_parity(lat: ClusterLattice, chain, sublattice: str = "primal") -> dict[str, int]:
    """Parity of ``|chain & membrane|`` for every membrane of one sublattice."""
    sub = lat.sub(sublattice)
    mask = _as_mask(sub, chain)
    return {m.name: int(mask[m.edges].sum() & 1) for m in sub.membranes}


def shortest_logical_chain(lat: ClusterLattice, sublattice: str, membrane: str | None = None) -> np.ndarray:
    """Edge ids of a shortest relative cycle crossing ``membrane`` an odd number of times.

    Defaults to the first membrane of the sublattice.  Search is a BFS on the
    parity double cover; closed cycles start by crossing one membrane edge,
    open chains start and end on terminal edges.
    """
    sub = lat.sub(sublattice)
    if not sub.membranes:
        raise ValueError(f"the {sub.name} lattice carries no logical membranes")
    mem = sub.membranes[0] if membrane is None else next(
        (m for m in sub.membranes if m.name == membrane), None
    )
    if mem is None:
        raise ValueError(f"no membrane named {membrane!r} on the {sub.name} lattice")
    on = np.zeros(sub.n_edges, dtype=np.int8)
    on[mem.edges] = 1

    def bfs(starts):
        # starts: list of ((vertex, parity), first edge); returns parents
        prev = {}
        q = deque()
        for state, e in starts:
            if state not in prev:
                prev[state] = (None, e)
                q.append(state)
        while q:
            x, par = q.popleft()
            for e, y in zip(sub.nbr_edge[x], sub.nbr_vert[x]):
                if e < 0 or y < 0:
                    continue
                key = (int(y), par ^ int(on[e]))
                if key not in prev:
                    prev[key] = ((x, par), int(e))
                    q.append(key)
        return prev

    def unwind(prev, state):
        out = []
        while state is not None:
            back, e = prev[state]
            out.append(e)
            state = back
        return out

    best: list[int] | None = None
    term_edges = np.flatnonzero(sub.active & (sub.v < 0))
    if term_edges.size:
        starts = [((int(sub.u[e]), int(on[e])), int(e)) for e in term_edges]
        prev = bfs(starts)
        for e in term_edges:
            key = (int(sub.u[e]), 1 ^ int(on[e]))
            if key in prev:
                chain = unwind(prev, key) + [int(e)]
                if best is None or len(chain) < len(best):
                    best = chain
    for e in mem.edges:
        a, b = int(sub.u[e]), int(sub.v[e])
        if b < 0 or not sub.active[e]:
            continue
        # crossing e itself sets parity 1; close the loop back at a with it intact
        prev = bfs([((b, 1), int(e))])
        if (a, 1) in prev:
            chain = unwind(prev, (a, 1))
            if best is None or len(chain) < len(best):
                best = chain
    if best is None:
        raise ValueError(f"membrane {mem.name!r} is not crossed by any relative cycle")
    mask = np.zeros(sub.n_edges, dtype=bool)
    np.logical_xor.at(mask, np.array(best, dtype=np.int64), True)
    return np.flatnonzero(mask)


# --------------------------------------------------------------------------
# canonical layouts


def empty_vacuum(d: int, boundary: str = PERIODIC) -> LatticeSpec:
    """Defect-free lattice of ``d`` cells per side (memory benchmarks)."""
    return LatticeSpec(d, d, d, d, boundary, (), (), "empty-vacuum")


def tube_width_for(d: int) -> int:
    return max(1, math.ceil(d / 4) - 1)


def fig2_pair(d: int, n_singular: int = 1, L_z: int | None = None) -> LatticeSpec:
    """Two parallel tubes along z, ``d`` edges apart, singular sites midway between them.

    The x extent puts the tubes ``d`` apart on both sides of the torus and the
    y extent leaves a gap of ``d`` between a tube and its periodic image, so
    every non-trivial cycle has length at least ``d``.
    """
    s = tube_width_for(d)
    per_layer = s + 1
    need = math.ceil(n_singular / per_layer) if n_singular else 0
    Lz = max(d, need) if L_z is None else L_z
    if per_layer * Lz < n_singular:
        raise LatticeSpecError("not enough room for the requested singular sites")
    Lx, Ly = 2 * s + 2 * d, s + d
    tubes = (
        DefectTube.straight(2, (0, 0, 0), Lz, s),
        DefectTube.straight(2, (s + d, 0, 0), Lz, s),
    )
    x_mid = s + (d - 1) // 2
    sites = tuple((x_mid, i % per_layer, i // per_layer) for i in range(n_singular))
    return LatticeSpec(Lx, Ly, Lz, d, PERIODIC, tubes, sites, "fig2-pair")


LAYOUTS = ("empty-vacuum", "fig2-pair")


def layout_spec(name: str, d: int, n_singular: int = 1, boundary: str = PERIODIC) -> LatticeSpec:
    if name == "empty-vacuum":
        return empty_vacuum(d, boundary)
    if boundary != PERIODIC:
        raise LatticeSpecError(f"layout {name!r} is defined on the periodic lattice only")
    if name == "fig2-pair":
        return fig2_pair(d, n_singular)
    raise ValueError(f"unknown layout {name!r}; choose from {LAYOUTS}")


def dump(lat: ClusterLattice) -> str:
    """Graph-state text with qubit roles as comment lines (parsable by ``GraphState.from_text``)."""
    lines = [f"# layout {lat.spec.layout} d={lat.d} dims={lat.spec.dims} boundary={lat.spec.boundary}"]
    for q, r in enumerate(lat.role.tolist()):
        if r != ROLE_VACUUM:
            lines.append(f"# role {q} {ROLE_NAMES[r]}")
    return "\n".join(lines) + "\n" + lat.graph.to_text()
