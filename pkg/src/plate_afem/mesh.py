"""Triangulations with boundary-part labels and newest-vertex bisection.

Conventions
-----------
* Triangles are stored counterclockwise; ``refedge[t]`` is the local index
  ``k`` of the vertex opposite the refinement edge, i.e. the refinement edge
  is ``conv{v[(k+1)%3], v[(k+2)%3]}``.
* Edge ``i`` of a triangle is the edge opposite its local vertex ``i``.
* Every edge carries a fixed unit normal.  Boundary normals point outward;
  interior normals point out of the adjacent triangle with the lower index.
  Edge endpoints are ordered so that the tangent ``rot90(normal)`` runs from
  ``edges[f, 0]`` to ``edges[f, 1]``.  Along the boundary this is the
  counterclockwise direction.
* Jumps of piecewise quantities across an interior edge are
  ``value_on_plus - value_on_minus`` with ``plus`` the lower-indexed triangle;
  on boundary edges the jump is the trace.

A triangulation is an immutable snapshot; refinement returns a new snapshot
that keeps a reference to its parent mesh and a triangle parent map.
"""

import hashlib
import json
from enum import IntEnum

import numpy as np

__all__ = [
    "BoundaryPart",
    "Triangulation",
    "MeshError",
    "build_mesh",
    "refine_nvb",
    "uniform_refine",
    "square_mesh",
    "lshape_mesh",
    "triangle_mesh",
    "preset_mesh",
    "mesh_to_dict",
    "mesh_from_dict",
    "save_mesh",
    "load_mesh",
    "mesh_hash",
    "ancestor_map",
]


class MeshError(Exception):
    """Invalid mesh input or construction failure."""


class BoundaryPart(IntEnum):
    INTERIOR = 0
    CLAMPED = 1
    SIMPLY_SUPPORTED = 2
    FREE = 3

    @property
    def label(self):
        return _PART_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "BoundaryPart":
        try:
            return _LABEL_PARTS[label]
        except KeyError:
            raise MeshError(f"unknown boundary tag {label!r}") from None


_PART_LABELS = {
    BoundaryPart.INTERIOR: "interior",
    BoundaryPart.CLAMPED: "clamped",
    BoundaryPart.SIMPLY_SUPPORTED: "simply_supported",
    BoundaryPart.FREE: "free",
}
_LABEL_PARTS = {v: k for k, v in _PART_LABELS.items()}


class Triangulation:
    """Immutable triangulation with derived incidence tables.

    Attributes
    ----------
    vertices : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    refedge : (T,) int array, local index of the vertex opposite the
        refinement edge
    edges : (F, 2) int array of endpoint indices, tangent-ordered
    edge_tags : (F,) int array of BoundaryPart values
    tri_edges : (T, 3) int array, global edge index opposite local vertex i
    edge_tris : (F, 2) int array, adjacent triangles (t_plus, t_minus);
        t_minus is -1 on the boundary
    """

    def __init__(self, vertices, triangles, refedge, edge_tags=None,
                 generation=None, parent=None, coarse=None,
                 vertex_parent_edge=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.refedge = np.ascontiguousarray(refedge, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be a (T, 3) array")
        if len(self.triangles) == 0:
            raise MeshError("mesh must contain at least one triangle")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle vertex index out of range")

        self._build_geometry()
        self._build_edges()

        self.generation = (np.zeros(len(self.triangles), dtype=np.int64)
                           if generation is None else np.asarray(generation))
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)
        self.coarse = coarse
        # for refined meshes: coarse edge that each new vertex bisects (-1 otherwise)
        self.vertex_parent_edge = (None if vertex_parent_edge is None
                                   else np.asarray(vertex_parent_edge, dtype=np.int64))

        if edge_tags is None:
            edge_tags = np.where(self.boundary_edge_mask,
                                 int(BoundaryPart.FREE), int(BoundaryPart.INTERIOR))
        self.edge_tags = np.ascontiguousarray(edge_tags, dtype=np.int64)
        self._check_tags()

    # -- construction helpers -------------------------------------------------

    def _build_geometry(self):
        p = self.vertices[self.triangles]           # (T, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        self.signed_areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmin(self.signed_areas))
            raise MeshError(f"triangle {bad} is degenerate or not counterclockwise")
        self.areas = self.signed_areas.copy()
        self.h_t = np.sqrt(self.areas)
        self.centroids = p.mean(axis=1)

    def _build_edges(self):
        tris = self.triangles
        ntri = len(tris)
        # edge opposite local vertex i connects local vertices i+1, i+2
        raw = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1)
        raw = raw.reshape(-1, 2)                     # (3T, 2), directed ccw
        keys = np.sort(raw, axis=1)
        uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                          return_counts=True)
        inverse = inverse.ravel()
        if counts.max() > 2:
            raise MeshError("non-conforming mesh: an edge is shared by >2 triangles")
        self.edges = uniq                            # provisional endpoint order
        self.tri_edges = inverse.reshape(ntri, 3)
        nedges = len(uniq)

        # adjacency, slot 0 holding the lower triangle index
        flat_tri = np.repeat(np.arange(ntri), 3)
        order = np.argsort(inverse, kind="stable")
        starts = np.cumsum(counts) - counts
        edge_tris = np.full((nedges, 2), -1, dtype=np.int64)
        edge_tris[:, 0] = flat_tri[order[starts]]
        two = counts == 2
        edge_tris[two, 1] = flat_tri[order[starts[two] + 1]]
        self.edge_tris = edge_tris
        self.boundary_edge_mask = edge_tris[:, 1] == -1
        self.interior_edge_mask = ~self.boundary_edge_mask

        # orient endpoints as traversed by the plus triangle (ccw), so the
        # normal rot-90(tangent) points out of it
        endpoints = uniq.copy()
        plus = edge_tris[:, 0]
        tri_of_plus = tris[plus]                     # (F, 3)
        for k in range(3):
            a = tri_of_plus[:, k]
            b = tri_of_plus[:, (k + 1) % 3]
            m = (np.minimum(a, b) == uniq[:, 0]) & (np.maximum(a, b) == uniq[:, 1])
            endpoints[m, 0] = a[m]
            endpoints[m, 1] = b[m]
        self.edges = endpoints

        vec = self.vertices[endpoints[:, 1]] - self.vertices[endpoints[:, 0]]
        self.edge_lengths = np.linalg.norm(vec, axis=1)
        if np.any(self.edge_lengths <= 0.0):
            raise MeshError("zero-length edge")
        tangent = vec / self.edge_lengths[:, None]
        self.edge_tangents = tangent
        self.edge_normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        self.edge_midpoints = 0.5 * (self.vertices[endpoints[:, 0]]
                                     + self.vertices[endpoints[:, 1]])

        # vertex -> incident triangle (any), for point evaluation at vertices
        vt = np.full(len(self.vertices), -1, dtype=np.int64)
        vt[tris.ravel()] = np.repeat(np.arange(ntri), 3)
        if np.any(vt < 0):
            raise MeshError("mesh contains a vertex not used by any triangle")
        self.vertex_tri = vt

    def _check_tags(self):
        if len(self.edge_tags) != len(self.edges):
            raise MeshError("edge_tags length mismatch")
        interior_bad = self.interior_edge_mask & (self.edge_tags != BoundaryPart.INTERIOR)
        boundary_bad = self.boundary_edge_mask & (self.edge_tags == BoundaryPart.INTERIOR)
        if np.any(interior_bad):
            raise MeshError("interior edge carries a boundary tag")
        if np.any(boundary_bad):
            raise MeshError("boundary edge is missing a part label")

    # -- incidence / query API ------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def h_max(self) -> float:
        return float(self.h_t.max())

    def edges_of(self, t):
        """Edges of triangle ``t`` (global indices, opposite-vertex order)."""
        return self.tri_edges[t]

    def edges_with_tag(self, *parts) -> np.ndarray:
        """Indices of edges whose tag is one of ``parts``."""
        mask = np.isin(self.edge_tags, [int(p) for p in parts])
        return np.nonzero(mask)[0]

    def interior_edges(self):
        return np.nonzero(self.interior_edge_mask)[0]

    def boundary_edges(self):
        return np.nonzero(self.boundary_edge_mask)[0]

    def edge_patch(self, f):
        """Adjacent triangle indices of edge ``f`` (one entry on the boundary)."""
        pair = self.edge_tris[f]
        return pair[pair >= 0]

    def vertices_on(self, *parts) -> np.ndarray:
        """Boolean mask of vertices lying on edges tagged with any of ``parts``."""
        mask = np.zeros(self.num_vertices, dtype=bool)
        sel = self.edges_with_tag(*parts)
        mask[self.edges[sel].ravel()] = True
        return mask

    def free_corner_vertices(self) -> np.ndarray:
        """Vertices shared by exactly two free boundary edges."""
        free = self.edges_with_tag(BoundaryPart.FREE)
        counts = np.zeros(self.num_vertices, dtype=np.int64)
        np.add.at(counts, self.edges[free].ravel(), 1)
        return np.nonzero(counts == 2)[0]

    def euler_identities(self):
        """(#N + #T - 1 - #F, 2#T + 1 - #N - #F_interior); zero on disk-like meshes."""
        n, t, f = self.num_vertices, self.num_triangles, self.num_edges
        fi = int(self.interior_edge_mask.sum())
        return n + t - 1 - f, 2 * t + 1 - n - fi

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("td,td->t", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))

    def similarity_classes(self, decimals=12):
        """Set of triangle shapes as normalised, sorted side-length triples."""
        p = self.vertices[self.triangles]
        sides = np.stack([
            np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
        ], axis=1)
        sides.sort(axis=1)
        sides /= sides[:, 2:3]
        return {tuple(row) for row in np.round(sides, decimals)}

    def matching_neighbor_violations(self) -> np.ndarray:
        """Interior edges that are the refinement edge of exactly one neighbour.

        Newest-vertex bisection terminates and stays shape regular for any
        initial assignment audited here; an empty result certifies the usual
        compatibility condition.
        """
        is_ref = np.zeros(self.num_edges, dtype=np.int64)
        ref_global = self.tri_edges[np.arange(self.num_triangles), self.refedge]
        np.add.at(is_ref, ref_global, 1)
        interior = self.interior_edge_mask
        return np.nonzero(interior & (is_ref == 1))[0]

    def split_parents(self) -> np.ndarray:
        """Coarse triangles no longer present (bisected away by the last refine)."""
        if self.parent is None:
            return np.array([], dtype=np.int64)
        counts = np.bincount(self.parent, minlength=self.coarse.num_triangles)
        return np.nonzero(counts > 1)[0]

    @property
    def _key_table(self):
        # undirected endpoint pair -> edge index, cached for refinement
        if not hasattr(self, "_key_table_cache"):
            keys = np.sort(self.edges, axis=1)
            self._key_table_cache = {(int(i), int(j)): f
                                     for f, (i, j) in enumerate(keys)}
        return self._key_table_cache

    def _replace(self, **kw):
        args = dict(vertices=self.vertices, triangles=self.triangles,
                    refedge=self.refedge, edge_tags=self.edge_tags,
                    generation=self.generation, parent=self.parent,
                    coarse=self.coarse, vertex_parent_edge=self.vertex_parent_edge)
        args.update(kw)
        return Triangulation(**args)


def _flip_edge_orientation(mesh, edge_id):
    """Copy of ``mesh`` with the stored normal of one interior edge reversed.

    Test hook for the sign-convention invariance checks.
    """
    if not mesh.interior_edge_mask[edge_id]:
        raise MeshError("can only flip interior edge normals")
    out = mesh._replace()
    out.edges = mesh.edges.copy()
    out.edges[edge_id] = mesh.edges[edge_id, ::-1]
    out.edge_tris = mesh.edge_tris.copy()
    out.edge_tris[edge_id] = mesh.edge_tris[edge_id, ::-1]
    out.edge_tangents = mesh.edge_tangents.copy()
    out.edge_tangents[edge_id] *= -1.0
    out.edge_normals = mesh.edge_normals.copy()
    out.edge_normals[edge_id] *= -1.0
    return out


# -- building ------------------------------------------------------------------


def _point_on_segment(p, a, b, tol):
    ab = b - a
    ap = p - a
    L2 = ab @ ab
    cross = ab[0] * ap[1] - ab[1] * ap[0]
    if abs(cross) > tol * np.sqrt(L2):
        return False
    s = (ap @ ab) / L2
    return -tol <= s <= 1.0 + tol


def build_mesh(vertices, triangles, boundary, refedge=None) -> Triangulation:
    """Build a labelled triangulation from raw arrays.

    Parameters
    ----------
    vertices : (N, 2) array of points
    triangles : (T, 3) array of counterclockwise vertex triples
    boundary : sequence of ``(i, j, tag)`` straight boundary segments given by
        endpoint vertex indices; every boundary edge of the mesh must lie in
        exactly one segment and inherits its tag.  Tags are BoundaryPart
        members or their string labels.
    refedge : optional (T,) array of refinement-edge assignments.  Default is
        the longest edge, ties broken by the smallest global edge index.

    Raises MeshError for non-conforming input, degenerate triangles or
    boundary edges not covered by exactly one labelled segment.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if refedge is None:
        refedge = np.zeros(len(triangles), dtype=np.int64)  # placeholder
        mesh = Triangulation(vertices, triangles, refedge)
        refedge = _longest_edge_assignment(mesh)
    mesh = Triangulation(vertices, triangles, refedge)

    scale = np.max(np.abs(vertices)) or 1.0
    tol = 1e-12 * scale
    segs = []
    for i, j, tag in boundary:
        part = tag if isinstance(tag, BoundaryPart) else BoundaryPart.from_label(tag)
        if part == BoundaryPart.INTERIOR:
            raise MeshError("boundary segments cannot be tagged interior")
        segs.append((vertices[int(i)], vertices[int(j)], part))

    tags = np.full(mesh.num_edges, int(BoundaryPart.INTERIOR), dtype=np.int64)
    for f in mesh.boundary_edges():
        a = vertices[mesh.edges[f, 0]]
        b = vertices[mesh.edges[f, 1]]
        hits = [part for (p, q, part) in segs
                if _point_on_segment(a, p, q, tol) and _point_on_segment(b, p, q, tol)]
        if len(hits) == 0:
            raise MeshError(f"boundary edge {f} not covered by any labelled segment")
        if len(set(hits)) > 1:
            raise MeshError(f"boundary edge {f} straddles two part labels")
        tags[f] = int(hits[0])
    return mesh._replace(edge_tags=tags)


def _longest_edge_assignment(mesh):
    # longest edge per triangle; ties by smallest global edge index
    lengths = mesh.edge_lengths[mesh.tri_edges]      # (T, 3)
    gidx = mesh.tri_edges
    ref = np.zeros(mesh.num_triangles, dtype=np.int64)
    for t in range(mesh.num_triangles):
        best = max(range(3), key=lambda k: (lengths[t, k], -gidx[t, k]))
        ref[t] = best
    return ref


# -- refinement ----------------------------------------------------------------


def refine_nvb(mesh: Triangulation, marked, bisect_all_edges=False) -> Triangulation:
    """Newest-vertex bisection of the marked triangles with conformity closure.

    Every marked triangle is bisected at least once; marked edges propagate
    through refinement edges until the split set is closed, which keeps the
    result conforming.  With ``bisect_all_edges`` each marked triangle is
    split into four (all three edges bisected).

    Returns the input object unchanged when nothing is marked.
    """
    marked = _as_index_array(marked, mesh.num_triangles)
    if marked.size == 0:
        return mesh

    split_edge = np.zeros(mesh.num_edges, dtype=bool)
    if bisect_all_edges:
        split_edge[mesh.tri_edges[marked].ravel()] = True
    else:
        split_edge[mesh.tri_edges[marked, mesh.refedge[marked]]] = True
    _closure(mesh, split_edge)
    return _apply_split(mesh, split_edge)


def uniform_refine(mesh: Triangulation) -> Triangulation:
    """Bisect every edge of the mesh (each triangle becomes four children)."""
    split_edge = np.ones(mesh.num_edges, dtype=bool)
    return _apply_split(mesh, split_edge)


def _as_index_array(marked, ntri):
    marked = getattr(marked, "indices", marked)
    arr = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset))
                               else marked, dtype=np.int64).ravel())
    if arr.size and (arr[0] < 0 or arr[-1] >= ntri):
        raise MeshError("marked triangle index out of range")
    return arr


def _closure(mesh, split_edge):
    # a triangle with any split edge must also split its refinement edge
    ref_global = mesh.tri_edges[np.arange(mesh.num_triangles), mesh.refedge]
    while True:
        touched = split_edge[mesh.tri_edges].any(axis=1)
        need = touched & ~split_edge[ref_global]
        if not need.any():
            return
        split_edge[ref_global[need]] = True


def _apply_split(mesh, split_edge):
    split_ids = np.nonzero(split_edge)[0]
    nold = mesh.num_vertices
    midpoint_index = np.full(mesh.num_edges, -1, dtype=np.int64)
    midpoint_index[split_ids] = nold + np.arange(len(split_ids))
    new_vertices = np.vstack([mesh.vertices, mesh.edge_midpoints[split_ids]])
    vparent = np.full(len(new_vertices), -1, dtype=np.int64)
    vparent[nold:] = split_ids

    tris, refs, gens, parents = [], [], [], []

    def emit(tri, gen, parent):
        tris.append(tri)
        refs.append(0)
        gens.append(gen)
        parents.append(parent)

    def bisect(tri, k, gen, parent, depth):
        # split conv{p, q} at m; children refine their inherited old edges next
        a, p, q = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
        m = _midpoint_of(mesh, midpoint_index, p, q)
        for child in ((m, a, p), (m, q, a)):
            e1, e2 = child[1], child[2]
            if depth == 0 and _edge_is_split(mesh, split_edge, e1, e2):
                bisect(child, 0, gen + 1, parent, depth + 1)
            else:
                emit(child, gen + 1, parent)

    for t in range(mesh.num_triangles):
        k = mesh.refedge[t]
        if split_edge[mesh.tri_edges[t, k]]:
            bisect(tuple(mesh.triangles[t]), k, int(mesh.generation[t]), t, 0)
        else:
            # closure guarantees no other edge of t is split
            tris.append(tuple(mesh.triangles[t]))
            refs.append(int(k))
            gens.append(int(mesh.generation[t]))
            parents.append(t)

    refined = Triangulation(new_vertices, np.array(tris), np.array(refs),
                            generation=np.array(gens), parent=np.array(parents),
                            coarse=mesh, vertex_parent_edge=vparent)
    tags = _inherit_tags(mesh, refined, midpoint_index)
    return refined._replace(edge_tags=tags)


def _midpoint_of(mesh, midpoint_index, p, q):
    f = mesh._key_table[(min(p, q), max(p, q))]
    m = midpoint_index[f]
    assert m >= 0
    return int(m)


def _edge_is_split(mesh, split_edge, p, q):
    f = mesh._key_table.get((min(p, q), max(p, q)))
    return f is not None and split_edge[f]


def _inherit_tags(coarse, refined, midpoint_index):
    # a boundary edge of the refined mesh is either a surviving coarse edge or
    # one half of a split coarse boundary edge
    table = coarse._key_table
    inv_mid = {int(midpoint_index[f]): f for f in np.nonzero(midpoint_index >= 0)[0]}
    tags = np.full(refined.num_edges, int(BoundaryPart.INTERIOR), dtype=np.int64)
    nold = coarse.num_vertices
    for f in refined.boundary_edges():
        a, b = int(refined.edges[f, 0]), int(refined.edges[f, 1])
        if a >= nold or b >= nold:
            m, other = (a, b) if a >= nold else (b, a)
            parent_edge = inv_mid[m]
            if other not in (int(coarse.edges[parent_edge, 0]),
                             int(coarse.edges[parent_edge, 1])):
                raise MeshError("refined boundary edge has no parent edge")
        else:
            parent_edge = table.get((min(a, b), max(a, b)))
            if parent_edge is None:
                raise MeshError("refined boundary edge has no parent edge")
        tags[f] = coarse.edge_tags[parent_edge]
    return tags


def ancestor_map(fine: Triangulation, coarse: Triangulation) -> np.ndarray:
    """Index of the ancestor in ``coarse`` for every triangle of ``fine``.

    Raises MeshError unless ``coarse`` appears in the refinement chain of
    ``fine`` (object identity).
    """
    if fine is coarse:
        return np.arange(fine.num_triangles)
    chain = []
    m = fine
    while m is not coarse:
        if m.parent is None or m.coarse is None:
            raise MeshError("mesh is not a refinement of the given coarse mesh")
        chain.append(m.parent)
        m = m.coarse
    amap = chain[0]
    for parent in chain[1:]:
        amap = parent[amap]
    return amap


# -- presets -------------------------------------------------------------------


def _expand_bc(bc, nseg):
    if isinstance(bc, (str, BoundaryPart)):
        bc = [bc] * nseg
    if len(bc) != nseg:
        raise MeshError(f"expected {nseg} boundary labels, got {len(bc)}")
    return list(bc)


def square_mesh(bc="clamped") -> Triangulation:
    """Unit square split into two triangles along the main diagonal.

    ``bc`` is a single label or four labels for the segments
    (bottom, right, top, left).
    """
    v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    t = [(0, 1, 2), (0, 2, 3)]
    segs = [(0, 1), (1, 2), (2, 3), (3, 0)]
    bc = _expand_bc(bc, 4)
    return build_mesh(v, t, [(i, j, tag) for (i, j), tag in zip(segs, bc)])


def lshape_mesh(bc="clamped") -> Triangulation:
    """L-shaped domain (-1,1)^2 minus [0,1]x[-1,0], six triangles.

    ``bc`` is a single label or six labels for the outline segments starting
    at the bottom edge and walking counterclockwise through the reentrant
    corner: bottom, reentrant-vertical, reentrant-horizontal, right, top,
    left.
    """
    v = [(-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0),
         (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0)]
    t = [(0, 1, 3), (0, 3, 2), (3, 4, 5), (3, 5, 6), (2, 3, 6), (2, 6, 7)]
    segs = [(0, 1), (1, 3), (3, 4), (4, 5), (5, 7), (7, 0)]
    bc = _expand_bc(bc, 6)
    return build_mesh(v, t, [(i, j, tag) for (i, j), tag in zip(segs, bc)])


def triangle_mesh(bc="free") -> Triangulation:
    """Single reference triangle (0,0), (1,0), (0,1)."""
    v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    t = [(0, 1, 2)]
    segs = [(0, 1), (1, 2), (2, 0)]
    bc = _expand_bc(bc, 3)
    return build_mesh(v, t, [(i, j, tag) for (i, j), tag in zip(segs, bc)])


_MIXED_BC = {"square": ["clamped", "simply_supported", "free", "simply_supported"],
             "lshape": ["clamped", "simply_supported", "free",
                        "clamped", "simply_supported", "free"]}


def preset_mesh(geometry: str, bc) -> Triangulation:
    """Named geometry presets: ``square``, ``lshape`` or ``triangle``.

    ``bc`` is a tag label, a list of per-segment labels, or ``"mixed"`` for a
    canonical clamped/simply-supported/free combination.
    """
    builders = {"square": square_mesh, "lshape": lshape_mesh,
                "triangle": triangle_mesh}
    if geometry not in builders:
        raise MeshError(f"unknown geometry preset {geometry!r}")
    if bc == "mixed":
        if geometry not in _MIXED_BC:
            raise MeshError(f"no mixed preset for geometry {geometry!r}")
        bc = _MIXED_BC[geometry]
    return builders[geometry](bc)


# -- serialization ---------------------------------------------------------------


def mesh_to_dict(mesh: Triangulation) -> dict:
    tri = np.hstack([mesh.triangles, mesh.refedge[:, None]])
    boundary = [{"segment": [int(mesh.edges[f, 0]), int(mesh.edges[f, 1])],
                 "tag": BoundaryPart(mesh.edge_tags[f]).label}
                for f in mesh.boundary_edges()]
    return {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "triangles": [[int(a) for a in row] for row in tri],
        "boundary": boundary,
    }


def mesh_from_dict(doc: dict) -> Triangulation:
    vertices = np.asarray(doc["vertices"], dtype=float)
    tri = np.asarray(doc["triangles"], dtype=np.int64)
    boundary = [(seg["segment"][0], seg["segment"][1], seg["tag"])
                for seg in doc["boundary"]]
    return build_mesh(vertices, tri[:, :3], boundary, refedge=tri[:, 3])


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        json.dump(mesh_to_dict(mesh), fh)


def load_mesh(path) -> Triangulation:
    with open(path) as fh:
        return mesh_from_dict(json.load(fh))


def mesh_hash(mesh) -> str:
    payload = json.dumps(mesh_to_dict(mesh), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()
