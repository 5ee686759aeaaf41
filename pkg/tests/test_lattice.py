import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _homology import complex_matrices, h1_dimension, shortest_odd_cycle
from vftsim.f2core import check_stabilizer_identities
from vftsim.lattice import (
    ROLE_DEFECT,
    ROLE_SINGULAR,
    ROLE_VACUUM,
    DefectTube,
    LatticeSpec,
    LatticeSpecError,
    build,
    dump,
    empty_vacuum,
    fig2_pair,
    geodesic_distance,
    layout_spec,
    membrane_parity,
)
from vftsim.f2core import GraphState


def edge_lookup(sub):
    dims = np.array(sub.edge_coords.max(axis=0)) + 1
    table = {tuple(c): i for i, c in enumerate(sub.edge_coords.tolist())}

    def find(a, b):
        # midpoint of two doubled-coordinate vertices one step apart, with wraparound
        mid = []
        for x, y, n in zip(a, b, dims):
            lo, hi = sorted((x % n, y % n))
            if lo == hi:
                mid.append(lo)
            else:
                mid.append(lo + 1 if hi - lo == 2 else (hi + 1) % n)
        return table[tuple(mid)]

    return find


def ring_edges(sub, verts):
    find = edge_lookup(sub)
    return [find(a, b) for a, b in zip(verts, verts[1:] + verts[:1])]


# -- construction ------------------------------------------------------------


def test_l2_periodic_edge_count():
    lat = build(empty_vacuum(2))
    assert lat.n_B == lat.n_W == 3 * 2**3
    assert lat.n == 6 * 2**3
    assert (lat.role == ROLE_VACUUM).all()
    assert lat.membranes and {m.name for m in lat.primal.membranes} == {"torus_x", "torus_y", "torus_z"}


@pytest.mark.parametrize("d", [3, 4, 5])
def test_tubes_closer_than_d_rejected(d):
    good = fig2_pair(d)
    t0, t1 = good.defect_layout
    moved = DefectTube.straight(2, (t1.cells[0][0] - 1, 0, 0), len(t1.cells), t1.width)
    bad = LatticeSpec(good.L_x, good.L_y, good.L_z, d, good.boundary, (t0, moved), (), "custom")
    with pytest.raises(LatticeSpecError):
        build(bad)
    build(good)


def test_overlapping_tubes_rejected():
    t = DefectTube.straight(2, (0, 0, 0), 3)
    with pytest.raises(LatticeSpecError):
        build(LatticeSpec(8, 8, 3, 3, "periodic", (t, t), ()))


def test_bad_spec_values():
    with pytest.raises(LatticeSpecError):
        build(empty_vacuum(1))
    with pytest.raises(LatticeSpecError):
        layout_spec("fig2-pair", 3, boundary="open")


def test_fig2_membranes_and_roles(fig2_d3):
    lat = fig2_d3
    names = {m.name for m in lat.membranes}
    assert any(n.startswith("connect:") for n in names)
    assert any(n.startswith("wrap:") for n in names)
    roles = set(lat.role.tolist())
    assert roles == {ROLE_VACUUM, ROLE_DEFECT, ROLE_SINGULAR}
    assert (lat.role == ROLE_SINGULAR).sum() == 1
    assert check_stabilizer_identities(lat.graph)


def test_singular_site_between_tubes(fig2_d3):
    (site,) = fig2_d3.singular
    t0, t1 = fig2_d3.spec.defect_layout
    x0 = t0.cells[0][0] + t0.width
    assert x0 < site.coord[0] < t1.cells[0][0]
    assert site.region["B"].size and site.local_membrane["B"].size


def test_six_edges_per_vertex_periodic(vac_d3, fig2_d3):
    for sub in (vac_d3.primal, vac_d3.dual):
        deg = np.bincount(np.concatenate([sub.u, sub.v]), minlength=sub.n_vertices)
        assert (deg == 6).all()
    for sub in (fig2_d3.primal, fig2_d3.dual):
        act = sub.active
        ends = np.concatenate([sub.u[act], sub.v[act]])
        deg = np.bincount(ends[ends >= 0], minlength=sub.n_vertices)
        # vertices next to a tube lose edges to it (primal) or have the face removed (dual)
        assert deg.max() == 6 and (deg <= 6).all()


def test_open_boundary_degrees(vac_open_d3):
    sub = vac_open_d3.primal
    deg = np.bincount(np.concatenate([sub.u, sub.v[sub.v >= 0]]), minlength=sub.n_vertices)
    assert deg.max() == 6 and deg.min() == 3


def test_dump_parses_back(fig2_d3):
    g = GraphState.from_text(dump(fig2_d3))
    assert g.A == fig2_d3.graph.A


# -- chain complex -----------------------------------------------------------


@pytest.mark.parametrize("name", ["fig2_d3", "vac_d3", "vac_open_d3", "fig2_d5"])
@pytest.mark.parametrize("which", ["B", "W"])
def test_boundary_of_boundary_vanishes(lattices, name, which):
    lat = lattices[name]
    sub = lat.sub(which)
    _, faces = complex_matrices(lat, which)  # rows: plaquettes that avoid the defects
    for row in faces[:200]:
        assert not sub.boundary(row).any()


@pytest.mark.parametrize("name", ["fig2_d3", "vac_d3", "vac_open_d3", "fig2_d5"])
@pytest.mark.parametrize("which", ["B", "W"])
def test_membranes_are_a_homology_basis(lattices, name, which):
    """Independent rank computation: one membrane per class, no more, no fewer."""
    lat = lattices[name]
    sub = lat.sub(which)
    assert len(sub.membranes) == h1_dimension(lat, which)
    _, faces = complex_matrices(lat, which)
    for m in sub.membranes:
        on = np.zeros(sub.n_edges, dtype=bool)
        on[m.edges] = True
        # a plaquette boundary never crosses a membrane oddly
        assert not ((faces & sub.active[None, :] & on[None, :]).sum(axis=1) & 1).any()


@pytest.mark.parametrize("name", ["fig2_d3", "vac_d3", "vac_open_d3", "fig2_d5"])
@pytest.mark.parametrize("which", ["B", "W"])
def test_nontrivial_cycles_have_length_at_least_d(lattices, name, which):
    lat = lattices[name]
    for m in lat.sub(which).membranes:
        L = shortest_odd_cycle(lat, which, m.edges)
        assert L is not None and L >= lat.d, m.name


# -- geodesics ---------------------------------------------------------------


def _wrap(a, b, n):
    k = abs(a - b) % n
    return min(k, n - k)


def test_adjacent_vertices(vac_d3):
    assert geodesic_distance(vac_d3, (0, 0, 0), (2, 0, 0)).length == 1
    assert geodesic_distance(vac_d3, (1, 1, 1), (1, 1, 3)).length == 1


def test_manhattan_with_wraparound(vac_d3):
    L = vac_d3.spec.L_x
    verts = [tuple(c) for c in vac_d3.primal.vertex_coords.tolist()]
    for a in verts[:5]:
        for b in verts:
            want = sum(_wrap(x // 2, y // 2, L) for x, y in zip(a, b))
            assert geodesic_distance(vac_d3, a, b).length == want
    assert geodesic_distance(vac_d3, (0, 0, 0), (4, 4, 4)).length == 3


def test_path_around_tube_is_longer(fig2_d3):
    lat = fig2_d3
    sub = lat.primal
    t0 = lat.spec.defect_layout[0]
    lo_y = t0.cells[0][1] - 1
    hi_y = t0.cells[0][1] + t0.width + 1
    a, b = (2, 2 * (lo_y % lat.spec.L_y), 0), (2, 2 * hi_y, 0)
    # through the tube the straight segment would be Manhattan; the vacuum path must detour
    man = _wrap(lo_y, hi_y, lat.spec.L_y)
    assert (a in [tuple(c) for c in sub.vertex_coords.tolist()]) and (b in [tuple(c) for c in sub.vertex_coords.tolist()])
    L = geodesic_distance(lat, a, b).length
    assert L >= man
    # pick vertices straddling the tube along x
    L_x = lat.spec.L_x
    left = ((t0.cells[0][0] - 1) % L_x, 0, 0)
    right = (t0.cells[0][0] + t0.width + 1, 0, 0)
    lw = tuple(2 * c for c in left)
    rw = tuple(2 * c for c in right)
    direct = sum(_wrap(x, y, n) for x, y, n in zip(left, right, lat.spec.dims))
    assert geodesic_distance(lat, lw, rw).length > direct


def test_open_boundary_distance(vac_open_d3):
    g = geodesic_distance(vac_open_d3, (1, 1, 1), (3, 3, 3))
    assert g.length == 3
    assert g.v1_boundary == 1 and g.v2_boundary == 2


def test_mixed_sublattices_rejected(vac_d3):
    with pytest.raises(ValueError):
        geodesic_distance(vac_d3, (0, 0, 0), (1, 1, 1))


@given(st.data())
def test_geodesic_is_a_metric(fig2_d3, data):
    sub = fig2_d3.sub(data.draw(st.sampled_from(["B", "W"])))
    n = sub.n_vertices
    i, j, k = (data.draw(st.integers(0, n - 1)) for _ in range(3))
    D = sub.dist
    assert D[i, i] == 0
    assert D[i, j] == D[j, i]
    assert D[i, k] <= D[i, j] + D[j, k]
    assert len(sub.path(i, j)) == D[i, j]
    chain = np.zeros(sub.n_edges, dtype=bool)
    np.logical_xor.at(chain, np.array(sub.path(i, j), dtype=np.int64), True)
    ends = np.flatnonzero(sub.boundary(chain)).tolist()
    assert ends == ([] if i == j else sorted({i, j}))


def test_dist_matrix_matches_bfs(fig2_d3):
    sub = fig2_d3.dual
    start = 0
    seen = {start: 0}
    q = deque([start])
    while q:
        x = q.popleft()
        for e, y in sub.neighbours(x):
            if y >= 0 and y not in seen:
                seen[y] = seen[x] + 1
                q.append(y)
    for v, dv in seen.items():
        assert sub.dist[start, v] == dv


# -- membranes ---------------------------------------------------------------


def test_empty_chain_parities(fig2_d3):
    assert set(membrane_parity(fig2_d3, [], "primal").values()) == {0}
    assert set(membrane_parity(fig2_d3, [], "dual").values()) == {0}


def test_cycle_around_one_tube_flips_wrap(fig2_d3):
    lat = fig2_d3
    t0 = lat.spec.defect_layout[0]
    x0, y0, _ = t0.cells[0]
    s = t0.width
    lo, hi = 2 * x0 - 1, 2 * (x0 + s) + 1
    ylo, yhi = 2 * y0 - 1, 2 * (y0 + s) + 1
    z = 1
    xs = list(range(lo, hi + 1, 2))
    ys = list(range(ylo, yhi + 1, 2))
    ring = [(x, ylo, z) for x in xs] + [(hi, y, z) for y in ys[1:]] + \
           [(x, yhi, z) for x in reversed(xs[:-1])] + [(lo, y, z) for y in reversed(ys[1:-1])]
    edges = ring_edges(lat.dual, ring)
    chain = np.zeros(lat.dual.n_edges, dtype=bool)
    chain[edges] = True
    assert not lat.dual.boundary(chain).any()
    par = membrane_parity(lat, edges, "dual")
    wrap = [k for k in par if k.startswith("wrap:")]
    assert wrap and all(par[k] == 1 for k in wrap)
    assert all(v == 0 for k, v in par.items() if not k.startswith("wrap:"))


def test_path_between_tubes_flips_connect(fig2_d3):
    lat = fig2_d3
    t0, t1 = lat.spec.defect_layout
    x_from = t0.cells[0][0] + t0.width
    x_to = t1.cells[0][0]
    find = edge_lookup(lat.primal)
    edges = [find((2 * x, 0, 0), (2 * x + 2, 0, 0)) for x in range(x_from, x_to)]
    assert len(edges) == lat.d
    assert not lat.primal.boundary(np.isin(np.arange(lat.primal.n_edges), edges)).any()
    par = membrane_parity(lat, edges, "primal")
    assert [v for k, v in par.items() if k.startswith("connect:")] == [1]


@settings(max_examples=40)
@given(st.data())
def test_trivial_cycles_have_zero_parity(fig2_d3, data):
    lat = fig2_d3
    which = data.draw(st.sampled_from(["B", "W"]))
    sub = lat.sub(which)
    _, faces = complex_matrices(lat, which)
    picks = data.draw(st.lists(st.integers(0, faces.shape[0] - 1), min_size=1, max_size=8))
    chain = np.zeros(sub.n_edges, dtype=bool)
    for r in picks:
        chain ^= faces[r] & sub.active
    assert set(membrane_parity(lat, chain, which).values()) <= {0}
