"""Conforming triangular meshes of convex polygons with edge connectivity.

Every degree of freedom of the nonconforming discretization lives on an
edge, so edges are first-class citizens here: the edge table is globally
ordered by vertex pair, each edge knows its incident triangles, and the
boundary edges are kept as an ordered counter-clockwise loop.  Meshes are
immutable once built; ``refine_uniform`` returns a new mesh that keeps a
reference to its parent together with the child-to-parent maps needed for
inter-level transfer.

Plain-text format (``write_mesh``/``read_mesh``)::

    crmesh 1
    vertices N
    x y            (N lines, 17 significant digits)
    triangles M
    i j k          (M lines, 0-based, counter-clockwise)

Edges and the boundary ordering are derived, never stored.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "MeshFormatError",
    "structured_unit_square",
    "refine_uniform",
    "read_mesh",
    "write_mesh",
    "MIN_ANGLE_FLOOR",
]

#: shape-regularity floor (radians): constructors reject meshes whose
#: minimum interior angle is below this
MIN_ANGLE_FLOOR = np.pi / 12.0  # 15 degrees


class MeshError(ValueError):
    """Invalid mesh data: connectivity, orientation or shape regularity."""


class MeshFormatError(MeshError):
    """Malformed mesh file; the message carries the offending line number."""


class Mesh:
    """Conforming triangulation of a convex polygon, one DOF slot per edge.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Counter-clockwise vertex triples.
    edges : (ne, 2) int array
        Vertex pairs (lo, hi), globally sorted by (lo, hi).
    tri_edges : (nt, 3) int array
        ``tri_edges[t, i]`` is the edge opposite local vertex ``i``.
    edge_tris : (ne, 2) int array
        Incident triangles in increasing index order; -1 pads boundary edges.
    boundary_edge_ids : (nb,) int array
        Edge ids along the boundary loop, counter-clockwise, starting at the
        lexicographically smallest boundary vertex.
    boundary_pos : (ne,) int array
        Position of an edge in the boundary loop, -1 for interior edges.
    boundary_normals : (nb, 2) float array
        Outward unit normals, aligned with ``boundary_edge_ids``.
    boundary_tris : (nb,) int array
        The unique incident triangle of each boundary edge.
    areas, edge_lengths, edge_midpoints, h_max, min_angle
        Geometry caches.
    parent : Mesh or None
        Set by ``refine_uniform``.
    parent_tri : (nt,) int array or None
        Coarse triangle containing each child triangle.
    parent_edge : (ne,) int array or None
        Coarse edge a fine edge is a half of, -1 if the fine edge lies in
        the interior of a coarse triangle.
    """

    def __init__(self, vertices, triangles, *, min_angle_floor=MIN_ANGLE_FLOOR,
                 _parent=None, _parent_tri=None, _parent_edge=None):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinate")
        nv = len(vertices)
        nt = len(triangles)
        if nt == 0:
            raise MeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= nv:
            raise MeshError("triangle vertex index out of range")

        # duplicate vertices break the derived connectivity
        _, uniq_counts = np.unique(vertices, axis=0, return_counts=True)
        if np.any(uniq_counts > 1):
            raise MeshError("duplicate vertex coordinates")

        self.vertices = vertices
        self.triangles = triangles

        p = vertices[triangles]  # (nt, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        twice_area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        bad = np.nonzero(twice_area <= 0.0)[0]
        if len(bad):
            raise MeshError(
                f"triangle {bad[0]} has non-positive signed area "
                "(vertices must be counter-clockwise)")
        self.areas = twice_area / 2.0

        self._build_edges()
        self._build_boundary()
        self._check_geometry(min_angle_floor)

        self.parent = _parent
        self.parent_tri = _parent_tri
        self.parent_edge = _parent_edge

        for arr in (self.vertices, self.triangles, self.edges, self.tri_edges,
                    self.edge_tris, self.boundary_edge_ids, self.boundary_pos,
                    self.boundary_normals, self.boundary_tris, self.areas,
                    self.edge_lengths, self.edge_midpoints):
            arr.flags.writeable = False

    # ------------------------------------------------------------------
    def _build_edges(self):
        tri = self.triangles
        nt = len(tri)
        # local edge i is opposite local vertex i
        pairs = np.empty((nt, 3, 2), dtype=np.int64)
        for i in range(3):
            a = tri[:, (i + 1) % 3]
            b = tri[:, (i + 2) % 3]
            pairs[:, i, 0] = np.minimum(a, b)
            pairs[:, i, 1] = np.maximum(a, b)
        flat = pairs.reshape(-1, 2)
        order = np.lexsort((flat[:, 1], flat[:, 0]))
        sorted_pairs = flat[order]
        new_edge = np.ones(len(flat), dtype=bool)
        new_edge[1:] = np.any(sorted_pairs[1:] != sorted_pairs[:-1], axis=1)
        self.edges = np.ascontiguousarray(sorted_pairs[new_edge])
        edge_of_sorted = np.cumsum(new_edge) - 1
        inverse = np.empty(len(flat), dtype=np.int64)
        inverse[order] = edge_of_sorted
        self.tri_edges = np.ascontiguousarray(inverse.reshape(nt, 3))

        ne = len(self.edges)
        if len(self.vertices) - ne + nt != 1:
            raise MeshError(
                "Euler relation #V - #E + #T = 1 violated; mesh is not a "
                "simply connected conforming triangulation")

        counts = np.bincount(self.tri_edges.ravel(), minlength=ne)
        if counts.max() > 2:
            eid = int(np.argmax(counts))
            raise MeshError(
                f"edge {eid} {tuple(self.edges[eid])} is shared by "
                f"{counts[eid]} triangles (non-conforming connectivity)")

        # incident triangles in increasing triangle order
        eflat = self.tri_edges.ravel()
        towner = np.repeat(np.arange(nt, dtype=np.int64), 3)
        order2 = np.lexsort((towner, eflat))
        e_sorted = eflat[order2]
        t_sorted = towner[order2]
        first = np.ones(len(e_sorted), dtype=bool)
        first[1:] = e_sorted[1:] != e_sorted[:-1]
        edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        edge_tris[e_sorted[first], 0] = t_sorted[first]
        second = ~first
        edge_tris[e_sorted[second], 1] = t_sorted[second]
        self.edge_tris = edge_tris

        ev = self.vertices[self.edges]
        dv = ev[:, 1] - ev[:, 0]
        self.edge_lengths = np.hypot(dv[:, 0], dv[:, 1])
        self.edge_midpoints = (ev[:, 0] + ev[:, 1]) / 2.0
        self.h_max = float(self.edge_lengths.max())

    # ------------------------------------------------------------------
    def _build_boundary(self):
        ne = len(self.edges)
        bmask = self.edge_tris[:, 1] < 0
        b_ids = np.nonzero(bmask)[0]
        nb = len(b_ids)
        if nb < 3:
            raise MeshError("boundary has fewer than 3 edges")

        # each boundary vertex must carry exactly two boundary edges
        adjacency: dict[int, list[int]] = {}
        for e in b_ids:
            for v in self.edges[e]:
                adjacency.setdefault(int(v), []).append(int(e))
        for v, es in adjacency.items():
            if len(es) != 2:
                raise MeshError(
                    f"boundary vertex {v} belongs to {len(es)} boundary "
                    "edges; boundary is not a single closed loop")

        bverts = np.fromiter(adjacency.keys(), dtype=np.int64)
        coords = self.vertices[bverts]
        start = int(bverts[np.lexsort((coords[:, 1], coords[:, 0]))[0]])

        loop_vertices = [start]
        loop_edges = []
        e = min(adjacency[start])
        v = start
        for _ in range(nb):
            loop_edges.append(e)
            a, b = self.edges[e]
            v = int(b) if int(a) == v else int(a)
            if v == start:
                break
            loop_vertices.append(v)
            e0, e1 = adjacency[v]
            e = e1 if e0 == e else e0
        if len(loop_edges) != nb or v != start:
            raise MeshError("boundary edges do not form a single closed loop")

        pts = self.vertices[np.array(loop_vertices, dtype=np.int64)]
        x, y = pts[:, 0], pts[:, 1]
        signed2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if signed2 < 0.0:
            loop_vertices = [loop_vertices[0]] + loop_vertices[:0:-1]
            loop_edges = loop_edges[::-1]
            signed2 = -signed2
        self._polygon_area = signed2 / 2.0

        self.boundary_edge_ids = np.array(loop_edges, dtype=np.int64)
        self.boundary_pos = np.full(ne, -1, dtype=np.int64)
        self.boundary_pos[self.boundary_edge_ids] = np.arange(nb)
        self.boundary_tris = self.edge_tris[self.boundary_edge_ids, 0].copy()

        # outward unit normals: perpendicular to the edge, away from the
        # third vertex of the incident triangle
        eids = self.boundary_edge_ids
        a = self.vertices[self.edges[eids, 0]]
        b = self.vertices[self.edges[eids, 1]]
        t = b - a
        n = np.stack((t[:, 1], -t[:, 0]), axis=1)
        n /= np.linalg.norm(n, axis=1)[:, None]
        tri = self.triangles[self.boundary_tris]
        opp_sum = tri.sum(axis=1) - self.edges[eids].sum(axis=1)
        c = self.vertices[opp_sum]
        mids = self.edge_midpoints[eids]
        flip = np.sum(n * (c - mids), axis=1) > 0.0
        n[flip] = -n[flip]
        self.boundary_normals = n

    # ------------------------------------------------------------------
    def _check_geometry(self, min_angle_floor):
        if abs(self.areas.sum() - self._polygon_area) > 1e-12 * self._polygon_area:
            raise MeshError(
                "sum of triangle areas does not match the polygon area "
                "(overlapping or missing triangles)")
        p = self.vertices[self.triangles]
        min_angle = np.inf
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            w = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.sum(u * w, axis=1) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            min_angle = min(min_angle, float(ang.min()))
        self.min_angle = min_angle
        if min_angle < min_angle_floor - 1e-12:
            raise MeshError(
                f"minimum interior angle {np.degrees(min_angle):.3f} deg is "
                f"below the shape-regularity floor "
                f"{np.degrees(min_angle_floor):.3f} deg")

    # ------------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_boundary_edges(self):
        return len(self.boundary_edge_ids)

    @property
    def n_interior_edges(self):
        return self.n_edges - self.n_boundary_edges

    def interior_edge_ids(self):
        """Interior edge ids in increasing global order."""
        return np.nonzero(self.boundary_pos < 0)[0]

    def __repr__(self):
        return (f"Mesh(nv={self.n_vertices}, nt={self.n_triangles}, "
                f"ne={self.n_edges}, nb={self.n_boundary_edges}, "
                f"h_max={self.h_max:.4g})")


def structured_unit_square(n):
    """Uniform mesh of [0,1]^2: n x n cells, each split along the
    lower-left to upper-right diagonal.

    Parameters
    ----------
    n : int
        Cells per side, n >= 1.

    Returns
    -------
    Mesh
        (n+1)^2 vertices, 2 n^2 triangles, 4 n boundary edges,
        h_max = sqrt(2)/n.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    side = np.arange(n + 1, dtype=np.float64) / n
    xx, yy = np.meshgrid(side, side)  # row j = y, col i = x
    vertices = np.stack((xx.ravel(), yy.ravel()), axis=1)

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    lower = np.stack((ll, lr, ur), axis=1)
    upper = np.stack((ll, ur, ul), axis=1)
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return Mesh(vertices, triangles)


def refine_uniform(mesh):
    """Red refinement: split each triangle into 4 congruent children.

    The children are similar to the parent, so h_max halves and angles are
    preserved.  The returned mesh records ``parent``, ``parent_tri`` and
    ``parent_edge`` for inter-level transfer.
    """
    nv = mesh.n_vertices
    nt = mesh.n_triangles
    new_vertices = np.vstack((mesh.vertices, mesh.edge_midpoints))

    tri = mesh.triangles
    m = nv + mesh.tri_edges  # (nt, 3): midpoint vertex of edge opposite vertex i
    children = np.empty((nt, 4, 3), dtype=np.int64)
    children[:, 0] = np.stack((tri[:, 0], m[:, 2], m[:, 1]), axis=1)
    children[:, 1] = np.stack((tri[:, 1], m[:, 0], m[:, 2]), axis=1)
    children[:, 2] = np.stack((tri[:, 2], m[:, 1], m[:, 0]), axis=1)
    children[:, 3] = m
    fine_triangles = children.reshape(-1, 3)
    parent_tri = np.repeat(np.arange(nt, dtype=np.int64), 4)

    fine = Mesh(new_vertices, fine_triangles,
                _parent=mesh, _parent_tri=parent_tri)

    # a fine edge with one original endpoint and one midpoint endpoint is a
    # half of the midpoint's coarse edge; midpoint-midpoint edges are interior
    lo = fine.edges[:, 0]
    hi = fine.edges[:, 1]
    parent_edge = np.full(fine.n_edges, -1, dtype=np.int64)
    sub = lo < nv
    if np.any(hi < nv):
        raise MeshError("refinement produced an edge between two coarse vertices")
    pe = hi[sub] - nv
    owner_ok = (mesh.edges[pe, 0] == lo[sub]) | (mesh.edges[pe, 1] == lo[sub])
    if not np.all(owner_ok):
        raise MeshError("refinement bookkeeping failed: stray sub-edge")
    parent_edge[sub] = pe
    parent_edge.flags.writeable = False
    fine.parent_edge = parent_edge
    return fine


def write_mesh(mesh):
    """Serialize a mesh to the plain-text format (17 significant digits)."""
    lines = ["crmesh 1", f"vertices {mesh.n_vertices}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"triangles {mesh.n_triangles}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"


def read_mesh(text):
    """Parse the plain-text mesh format; errors carry the line number."""
    lines = text.splitlines()

    def fail(lineno, msg):
        raise MeshFormatError(f"line {lineno}: {msg}")

    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            stripped = lines[pos - 1].strip()
            if stripped:
                return pos, stripped
        return pos + 1, None

    lineno, header = next_line()
    if header is None or header.split() != ["crmesh", "1"]:
        fail(lineno, f"expected header 'crmesh 1', got {header!r}")

    lineno, decl = next_line()
    parts = decl.split() if decl else []
    if len(parts) != 2 or parts[0] != "vertices" or not parts[1].isdigit():
        fail(lineno, f"expected 'vertices N', got {decl!r}")
    n_vertices = int(parts[1])

    vertices = np.empty((n_vertices, 2), dtype=np.float64)
    for row in range(n_vertices):
        lineno, line = next_line()
        tokens = line.split() if line else []
        if len(tokens) != 2:
            fail(lineno, f"expected 'x y' for vertex {row}, got {line!r}")
        try:
            vertices[row] = [float(tokens[0]), float(tokens[1])]
        except ValueError:
            fail(lineno, f"malformed vertex coordinate {line!r}")

    lineno, decl = next_line()
    parts = decl.split() if decl else []
    if len(parts) != 2 or parts[0] != "triangles" or not parts[1].isdigit():
        fail(lineno, f"expected 'triangles M', got {decl!r}")
    n_triangles = int(parts[1])

    triangles = np.empty((n_triangles, 3), dtype=np.int64)
    for row in range(n_triangles):
        lineno, line = next_line()
        tokens = line.split() if line else []
        if len(tokens) != 3:
            fail(lineno, f"expected 'i j k' for triangle {row}, got {line!r}")
        try:
            triangles[row] = [int(t) for t in tokens]
        except ValueError:
            fail(lineno, f"malformed triangle indices {line!r}")

    lineno, extra = next_line()
    if extra is not None:
        fail(lineno, f"unexpected trailing content {extra!r}")

    return Mesh(vertices, triangles)
