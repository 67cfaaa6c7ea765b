"""Flat closed oriented triangulated surfaces.

A surface is stored facet by facet: every triangle carries the positions of
its three corners in its own 2D isometric chart, so all downstream geometry
(areas, hat-function gradients, edge vectors) is local to a facet.  The chart
axes are the facet's oriented orthonormal frame (e1, e2) and the dual coframe
(du1, du2) is the basis in which 1-form coefficients are expressed; the
positive quarter-turn J of the facet plane is ``rot90``.

Global single-valued coordinates do not exist on a quotient torus, which is
why corners are lifted per facet instead of referencing vertex positions.
The ``vertices`` table only stores one representative position per vertex
(used by the torus builder and the Clifford sampler).

The builder :func:`build_torus_mesh` produces the hexagonal quotient torus:
the plane modulo the lattice spanned by (1, 0) and (1/2, sqrt(3)/2), refined
by 1/N.  Small quotients are not simplicial complexes (N=1 has one vertex and
three loop edges), so edge gluing is combinatorial data: each edge records the
two (facet, side) slots it identifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

GAMMA1 = np.array([1.0, 0.0])
GAMMA2 = np.array([0.5, math.sqrt(3.0) / 2.0])

EDGE_LENGTH_RTOL = 1e-12
AREA_RTOL = 1e-12


class MeshError(ValueError):
    """Raised for structurally invalid mesh data."""


def rot90(v):
    """Positive quarter-turn of chart vectors, (x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class TorusLattice:
    """Metadata attached to quotient-torus meshes: Z gamma1 + Z gamma2, refined by 1/n."""

    gamma1: np.ndarray
    gamma2: np.ndarray
    n: int

    @property
    def basis(self):
        return np.column_stack([self.gamma1, self.gamma2])


class TriangulatedSurface:
    """Closed oriented surface with a flat metric on every triangle.

    Parameters
    ----------
    vertices : (nv, 2) float
        Representative position per vertex.
    facets : (nf, 3) int
        Vertex ids per facet, corner order positively oriented in the chart.
    corners : (nf, 3, 2) float
        Lifted corner positions in each facet's own chart.
    euler_char : int
        Euler characteristic of the declared topology (0 for a torus).
    gluing : iterable of (f1, s1, f2, s2), optional
        Edge identifications; side s of a facet joins corner s to corner
        (s+1) % 3.  When omitted the gluing is derived by matching opposite
        directed sides, which requires the complex to be simplicial.
    lattice : TorusLattice, optional
        Present on builder/loader output for quotient tori.

    Instances are immutable after construction and safe to share.
    """

    def __init__(self, vertices, facets, corners, euler_char, gluing=None, lattice=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.facets = np.ascontiguousarray(facets, dtype=np.int32)
        self.corners = np.ascontiguousarray(corners, dtype=np.float64)
        self.euler_char = int(euler_char)
        self.lattice = lattice

        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be (nv, 2)")
        if self.facets.ndim != 2 or self.facets.shape[1] != 3:
            raise MeshError("facets must be (nf, 3)")
        if self.corners.shape != (*self.facets.shape, 2):
            raise MeshError("corners must be (nf, 3, 2)")
        if self.num_facets and (self.facets.min() < 0 or self.facets.max() >= self.num_vertices):
            raise MeshError("facet vertex id out of range")

        # Unsigned triangle areas; orientation is a validate_mesh concern.
        cross = np.cross(
            self.corners[:, 1] - self.corners[:, 0],
            self.corners[:, 2] - self.corners[:, 0],
        )
        self.facet_area = np.abs(cross) / 2.0
        self._signed_area2 = cross

        if gluing is None:
            gluing = _derive_gluing(self.facets, self.corners)
        self.edge_sides = _check_gluing(np.asarray(list(gluing), dtype=np.int32), self.num_facets)

        for arr in (self.vertices, self.facets, self.corners, self.facet_area, self.edge_sides):
            arr.setflags(write=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_facets(self):
        return self.facets.shape[0]

    @property
    def num_edges(self):
        return self.edge_sides.shape[0]

    @property
    def total_area(self):
        return float(self.facet_area.sum())

    @cached_property
    def side_vectors(self):
        """(nf, 3, 2) chart vector of side s, corner s -> corner (s+1) % 3."""
        vecs = self.corners[:, [1, 2, 0], :] - self.corners
        vecs.setflags(write=False)
        return vecs

    def side_endpoints(self, facet, side):
        """Vertex ids (tail, head) of a facet side."""
        return (
            int(self.facets[facet, side]),
            int(self.facets[facet, (side + 1) % 3]),
        )

    @cached_property
    def edge_lengths(self):
        """(ne, 2) side lengths of each edge measured in its two incident charts."""
        f, s = self.edge_sides[:, :, 0], self.edge_sides[:, :, 1]
        vecs = self.side_vectors[f, s]
        lens = np.linalg.norm(vecs, axis=2)
        lens.setflags(write=False)
        return lens

    @cached_property
    def spanning_tree(self):
        """Breadth-first spanning tree of the vertex graph, rooted at vertex 0."""
        return _build_spanning_tree(self, root=0)

    def __repr__(self):
        return (
            f"TriangulatedSurface(V={self.num_vertices}, E={self.num_edges}, "
            f"F={self.num_facets}, chi={self.euler_char})"
        )


@dataclass(frozen=True)
class SpanningTree:
    """BFS tree over the vertex graph; used for integrating exact forms.

    ``order`` lists vertices root-first; every non-root vertex w has a parent
    reached through a tree edge whose chart displacement and owning facet are
    recorded, so a potential propagates as f(w) = f(parent) + F_facet(vec).
    ``cotree_edges`` are the edge indices left out of the tree (their period
    defects detect non-exactness).
    """

    root: int
    order: np.ndarray
    parent: np.ndarray
    step_facet: np.ndarray
    step_vec: np.ndarray
    cotree_edges: np.ndarray


def _build_spanning_tree(mesh, root=0):
    nv, ne = mesh.num_vertices, mesh.num_edges
    heads = np.empty((ne, 2), dtype=np.int64)
    for e in range(ne):
        f, s = mesh.edge_sides[e, 0]
        heads[e] = mesh.side_endpoints(f, s)

    adjacency = [[] for _ in range(nv)]
    for e, (u, v) in enumerate(heads):
        adjacency[u].append((v, e, +1))
        adjacency[v].append((u, e, -1))

    order = [root]
    parent = np.full(nv, -1, dtype=np.int64)
    step_facet = np.zeros(nv, dtype=np.int64)
    step_vec = np.zeros((nv, 2))
    seen = np.zeros(nv, dtype=bool)
    seen[root] = True
    in_tree = np.zeros(ne, dtype=bool)
    cursor = 0
    while cursor < len(order):
        u = order[cursor]
        cursor += 1
        for v, e, sign in adjacency[u]:
            if seen[v]:
                continue
            seen[v] = True
            f, s = mesh.edge_sides[e, 0]
            parent[v] = u
            step_facet[v] = f
            step_vec[v] = sign * mesh.side_vectors[f, s]
            in_tree[e] = True
            order.append(v)
    if not seen.all():
        raise MeshError("vertex graph is not connected")
    tree = SpanningTree(
        root=root,
        order=np.asarray(order, dtype=np.int64),
        parent=parent,
        step_facet=step_facet,
        step_vec=step_vec,
        cotree_edges=np.flatnonzero(~in_tree),
    )
    for arr in (tree.order, tree.parent, tree.step_facet, tree.step_vec, tree.cotree_edges):
        arr.setflags(write=False)
    return tree


def _derive_gluing(facets, corners):
    """Pair opposite directed sides (u -> v with v -> u); simplicial complexes only."""
    by_pair = {}
    for f in range(facets.shape[0]):
        for s in range(3):
            u, v = int(facets[f, s]), int(facets[f, (s + 1) % 3])
            by_pair.setdefault((u, v), []).append((f, s))
    gluing = []
    consumed = set()
    for (u, v), sides in by_pair.items():
        if (u, v) in consumed or (v, u) in consumed:
            continue
        partners = by_pair.get((v, u), [])
        if u == v or len(sides) != 1 or len(partners) != 1:
            raise MeshError(
                f"ambiguous or unmatched edge between vertices {u} and {v}; "
                "supply an explicit gluing table"
            )
        gluing.append((*sides[0], *partners[0]))
        consumed.add((u, v))
        consumed.add((v, u))
    return gluing


def _check_gluing(gluing, nf):
    if gluing.size == 0:
        raise MeshError("mesh has no edges")
    if gluing.ndim != 2 or gluing.shape[1] != 4:
        raise MeshError("gluing rows must be (f1, s1, f2, s2)")
    sides = set()
    for f1, s1, f2, s2 in gluing:
        for f, s in ((f1, s1), (f2, s2)):
            if not (0 <= f < nf and 0 <= s < 3):
                raise MeshError(f"gluing references invalid facet side ({f}, {s})")
            if (f, s) in sides:
                raise MeshError(f"facet side ({f}, {s}) glued more than once")
            sides.add((f, s))
    if len(sides) != 3 * nf:
        raise MeshError("surface is not closed: some facet sides are unglued")
    return gluing.reshape(-1, 2, 2)


def build_torus_mesh(n):
    """Hexagonal quotient torus with N^2 vertices, 3N^2 edges, 2N^2 facets.

    Every facet is equilateral with area sqrt(3)/(4 N^2); all facet charts use
    the axes of the covering plane, so constant coefficient blocks over facets
    describe globally parallel forms.
    """
    if n < 1:
        raise MeshError("torus refinement must satisfy n >= 1")
    n = int(n)
    g1, g2 = GAMMA1 / n, GAMMA2 / n

    def vid(a, b):
        return (a % n) + (b % n) * n

    grid_b, grid_a = np.divmod(np.arange(n * n), n)
    vertices = grid_a[:, None] * g1 + grid_b[:, None] * g2

    facets = np.empty((2 * n * n, 3), dtype=np.int64)
    corners = np.empty((2 * n * n, 3, 2))
    gluing = []

    def down_id(a, b):
        return 2 * ((a % n) + (b % n) * n) + 1

    for b in range(n):
        for a in range(n):
            cell = a + b * n
            up, down = 2 * cell, 2 * cell + 1
            base = a * g1 + b * g2
            facets[up] = (vid(a, b), vid(a + 1, b), vid(a, b + 1))
            corners[up] = (base, base + g1, base + g2)
            facets[down] = (vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1))
            corners[down] = (base + g1, base + g1 + g2, base + g2)
            gluing.append((up, 0, down_id(a, b - 1), 1))
            gluing.append((up, 1, down, 2))
            gluing.append((up, 2, down_id(a - 1, b), 0))

    lattice = TorusLattice(gamma1=GAMMA1.copy(), gamma2=GAMMA2.copy(), n=n)
    return TriangulatedSurface(
        vertices, facets, corners, euler_char=0, gluing=gluing, lattice=lattice
    )


def validate_mesh(mesh):
    """Check every surface invariant; returns a list of violation messages.

    An empty list means the mesh is valid.  Each message names the offending
    simplex and the failed check.
    """
    violations = []

    if not np.isfinite(mesh.vertices).all():
        violations.append("vertices: non-finite coordinates")
    if not np.isfinite(mesh.corners).all():
        violations.append("corners: non-finite coordinates")

    for f in np.flatnonzero(mesh._signed_area2 <= 0):
        violations.append(f"facet {f}: corner triple not positively oriented")

    tri_area = np.abs(mesh._signed_area2) / 2.0
    bad = np.abs(mesh.facet_area - tri_area) > AREA_RTOL * np.maximum(1.0, tri_area)
    for f in np.flatnonzero(bad):
        violations.append(f"facet {f}: stored area inconsistent with corner positions")

    for e in range(mesh.num_edges):
        (f1, s1), (f2, s2) = mesh.edge_sides[e]
        u1, v1 = mesh.side_endpoints(f1, s1)
        u2, v2 = mesh.side_endpoints(f2, s2)
        if (u1, v1) != (v2, u2):
            violations.append(
                f"edge {e} (facet {f1} side {s1} / facet {f2} side {s2}): "
                "induced orientations are not opposite"
            )
        l1, l2 = mesh.edge_lengths[e]
        if abs(l1 - l2) > EDGE_LENGTH_RTOL * max(l1, l2):
            violations.append(
                f"edge {e} (facet {f1} side {s1} / facet {f2} side {s2}): "
                f"edge length mismatch ({l1!r} vs {l2!r})"
            )

    euler = mesh.num_vertices - mesh.num_edges + mesh.num_facets
    if euler != mesh.euler_char:
        violations.append(
            f"topology: V - E + F = {euler} differs from declared "
            f"Euler characteristic {mesh.euler_char}"
        )
    return violations


# --- mesh file format -------------------------------------------------------
#
# Plain text, '#' comments, whitespace-separated fields:
#
#   isoflow-mesh 1
#   euler <chi>
#   lattice <g1x> <g1y> <g2x> <g2y> <n>        (optional, quotient tori only)
#   vertex <id> <x> <y>                         (one per vertex, in order)
#   facet <v0> <v1> <v2> <corner data>
#   edge <f1> <s1> <f2> <s2>
#
# In lattice mode the corner data are six integers p0 q0 p1 q1 p2 q2 and
# corner k lifts to vertex_position(vk) + (pk*gamma1 + qk*gamma2)/n; otherwise
# the corner data are six floats, the chart coordinates of the three corners.


def write_mesh(mesh, path):
    """Write a mesh in the documented text schema (loss-free round trip)."""
    lines = ["isoflow-mesh 1", f"euler {mesh.euler_char}"]
    lattice = mesh.lattice
    if lattice is not None:
        g = (*lattice.gamma1, *lattice.gamma2)
        lines.append("lattice " + " ".join(f"{x:.17g}" for x in g) + f" {lattice.n}")
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append(f"vertex {i} {x:.17g} {y:.17g}")
    use_lattice = lattice is not None
    if use_lattice:
        basis_inv = np.linalg.inv(lattice.basis / lattice.n)
    for f in range(mesh.num_facets):
        ids = " ".join(str(v) for v in mesh.facets[f])
        if use_lattice:
            offsets = (mesh.corners[f] - mesh.vertices[mesh.facets[f]]) @ basis_inv.T
            ints = np.rint(offsets).astype(int)
            if not np.allclose(offsets, ints, atol=1e-9):
                raise MeshError(f"facet {f}: corner lifts are not lattice multiples")
            data = " ".join(str(v) for v in ints.ravel())
        else:
            data = " ".join(f"{v:.17g}" for v in mesh.corners[f].ravel())
        lines.append(f"facet {ids} {data}")
    for (f1, s1), (f2, s2) in mesh.edge_sides:
        lines.append(f"edge {f1} {s1} {f2} {s2}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read a mesh written by :func:`write_mesh`."""
    euler = None
    lattice = None
    vertices = []
    facet_rows = []
    gluing = []
    with open(path) as fh:
        header = None
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if header is None:
                if tok[:2] != ["isoflow-mesh", "1"]:
                    raise MeshError(f"{path}: not an isoflow mesh file")
                header = tok
                continue
            kind = tok[0]
            if kind == "euler":
                euler = int(tok[1])
            elif kind == "lattice":
                g = [float(x) for x in tok[1:5]]
                lattice = TorusLattice(
                    gamma1=np.array(g[:2]), gamma2=np.array(g[2:]), n=int(tok[5])
                )
            elif kind == "vertex":
                if int(tok[1]) != len(vertices):
                    raise MeshError(f"{path}: vertex ids must be consecutive")
                vertices.append((float(tok[2]), float(tok[3])))
            elif kind == "facet":
                facet_rows.append(tok[1:])
            elif kind == "edge":
                gluing.append(tuple(int(x) for x in tok[1:5]))
            else:
                raise MeshError(f"{path}: unknown record {kind!r}")
    if euler is None:
        raise MeshError(f"{path}: missing euler record")
    vertices = np.asarray(vertices, dtype=float)
    facets = np.asarray([[int(x) for x in row[:3]] for row in facet_rows], dtype=np.int64)
    corners = np.empty((len(facet_rows), 3, 2))
    for f, row in enumerate(facet_rows):
        data = row[3:]
        if len(data) != 6:
            raise MeshError(f"{path}: facet {f}: expected 6 corner fields")
        if lattice is not None:
            step = lattice.basis / lattice.n
            offs = np.asarray([int(x) for x in data]).reshape(3, 2)
            corners[f] = vertices[facets[f]] + offs @ step.T
        else:
            corners[f] = np.asarray([float(x) for x in data]).reshape(3, 2)
    return TriangulatedSurface(
        vertices, facets, corners, euler_char=euler,
        gluing=gluing or None, lattice=lattice,
    )
