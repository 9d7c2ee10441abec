import json

import numpy as np
import pytest

from plate_afem import mesh as msh
from plate_afem.mesh import BoundaryPart, MeshError


class TestBuild:
    def test_square_counts_and_euler(self):
        m = msh.square_mesh("clamped")
        assert (m.num_vertices, m.num_triangles, m.num_edges) == (4, 2, 5)
        assert m.euler_identities() == (0, 0)
        assert np.all(m.edge_tags[m.boundary_edges()] == BoundaryPart.CLAMPED)

    def test_reference_triangle(self):
        m = msh.triangle_mesh()
        assert m.num_triangles == 1
        assert m.num_edges == 3
        assert m.h_t[0] == pytest.approx(np.sqrt(0.5), abs=1e-15)

    def test_lshape_boundary(self):
        m = msh.lshape_mesh("clamped")
        assert m.num_triangles == 6
        assert len(m.boundary_edges()) == 8
        assert m.euler_identities() == (0, 0)

    def test_degenerate_triangle_rejected(self):
        v = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
        with pytest.raises(MeshError):
            msh.build_mesh(v, [(0, 1, 2)], [(0, 1, "free"), (1, 2, "free"), (2, 0, "free")])

    def test_clockwise_triangle_rejected(self):
        v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        with pytest.raises(MeshError):
            msh.build_mesh(v, [(0, 2, 1)], [(0, 1, "free"), (1, 2, "free"), (2, 0, "free")])

    def test_nonconforming_rejected(self):
        # three triangles sharing one edge
        v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, -1.0), (1.0, 1.0)]
        t = [(0, 1, 2), (0, 3, 1), (0, 1, 4)]
        with pytest.raises(MeshError):
            msh.build_mesh(v, t, [])

    def test_unlabelled_boundary_edge_rejected(self):
        v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        with pytest.raises(MeshError):
            msh.build_mesh(v, [(0, 1, 2)], [(0, 1, "free")])

    def test_straddling_segment_rejected(self):
        # one labelled segment spanning two parts over the same edge
        v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        segs = [(0, 1, "free"), (0, 1, "clamped"), (1, 2, "free"), (2, 0, "free")]
        with pytest.raises(MeshError):
            msh.build_mesh(v, [(0, 1, 2)], segs)

    def test_empty_mesh_rejected(self):
        with pytest.raises(MeshError):
            msh.build_mesh(np.zeros((0, 2)), np.zeros((0, 3), dtype=int), [])

    def test_mixed_presets(self):
        for geom in ("square", "lshape"):
            m = msh.preset_mesh(geom, "mixed")
            tags = set(int(t) for t in m.edge_tags[m.boundary_edges()])
            assert {int(BoundaryPart.CLAMPED), int(BoundaryPart.SIMPLY_SUPPORTED),
                    int(BoundaryPart.FREE)} == tags


class TestNormalsAndIncidence:
    def test_boundary_normals_point_outward(self):
        for m in (msh.square_mesh("free"), msh.lshape_mesh("free")):
            for f in m.boundary_edges():
                t = m.edge_tris[f, 0]
                out = m.edge_midpoints[f] - m.centroids[t]
                assert m.edge_normals[f] @ out > 0

    def test_interior_normal_from_lower_triangle(self):
        m = msh.square_mesh("clamped")
        f = m.interior_edges()[0]
        t_plus = m.edge_tris[f, 0]
        assert t_plus == min(m.edge_tris[f])
        out = m.edge_midpoints[f] - m.centroids[t_plus]
        assert m.edge_normals[f] @ out > 0

    def test_tangent_is_rotated_normal(self):
        m = msh.preset_mesh("lshape", "mixed")
        nu, tau = m.edge_normals, m.edge_tangents
        rot = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
        assert np.allclose(tau, rot, atol=1e-15)

    def test_incidence_queries(self):
        m = msh.square_mesh("clamped")
        assert len(m.interior_edges()) == 1
        assert len(m.edges_with_tag(BoundaryPart.CLAMPED)) == 4
        diag = m.interior_edges()[0]
        assert sorted(m.edge_patch(diag)) == [0, 1]
        assert set(m.edges_of(0)).union(m.edges_of(1)) == set(range(5))

    def test_free_corner_vertices(self):
        m = msh.square_mesh("free")
        # every vertex joins two free edges on the all-free square
        assert len(m.free_corner_vertices()) == 4
        m = msh.preset_mesh("square", "mixed")
        # single free segment: no vertex joins two free edges
        assert len(m.free_corner_vertices()) == 0


class TestRefine:
    def test_empty_marking_returns_same_object(self):
        m = msh.square_mesh("clamped")
        assert msh.refine_nvb(m, []) is m

    def test_single_triangle_bisection(self):
        m = msh.triangle_mesh()
        r = msh.refine_nvb(m, [0])
        assert r.num_triangles == 2
        assert r.num_vertices == 4
        mid = r.vertices[3]
        # children share the new vertex at the refinement-edge midpoint
        ref = m.tri_edges[0, m.refedge[0]]
        assert np.allclose(mid, m.edge_midpoints[ref])
        assert np.all((r.triangles == 3).sum(axis=1) == 1)

    def test_closure_bisects_neighbor(self):
        m = msh.square_mesh("clamped")
        r = msh.refine_nvb(m, [0])
        assert r.num_triangles == 4
        assert r.euler_identities() == (0, 0)

    def test_uniform_square_eight_children(self):
        m = msh.square_mesh("clamped")
        u = msh.uniform_refine(m)
        assert u.num_triangles == 8
        counts = np.bincount(u.parent)
        assert np.all(counts >= 2)

    def test_parent_area_sum(self):
        m = msh.preset_mesh("lshape", "mixed")
        u = msh.uniform_refine(msh.uniform_refine(m))
        mid = u.coarse
        sums = np.bincount(u.parent, weights=u.areas, minlength=mid.num_triangles)
        assert np.all(np.abs(sums - mid.areas) <= 1e-14 * mid.areas)

    def test_conformity_after_random_markings(self):
        rng = np.random.default_rng(3)
        m = msh.preset_mesh("lshape", "mixed")
        for _ in range(6):
            marked = rng.choice(m.num_triangles,
                                size=max(1, m.num_triangles // 3), replace=False)
            m = msh.refine_nvb(m, marked)
            assert m.euler_identities() == (0, 0)
            two = m.edge_tris[:, 1] >= 0
            assert np.all(two == ~m.boundary_edge_mask)

    def test_marked_triangles_are_bisected(self):
        rng = np.random.default_rng(5)
        m = msh.square_mesh("clamped")
        for _ in range(4):
            marked = rng.choice(m.num_triangles,
                                size=max(1, m.num_triangles // 4), replace=False)
            r = msh.refine_nvb(m, marked)
            counts = np.bincount(r.parent, minlength=m.num_triangles)
            assert np.all(counts[marked] >= 2)
            m = r

    def test_split_parents_queryable(self):
        m = msh.square_mesh("clamped")
        r = msh.refine_nvb(m, [0])
        assert set(r.split_parents()) == {0, 1}

    def test_boundary_tags_inherited(self):
        m = msh.preset_mesh("square", "mixed")
        u = msh.uniform_refine(m)
        for f in u.boundary_edges():
            midpoint = u.edge_midpoints[f]
            # bottom y=0 clamped, right x=1 simply supported, top free, left ss
            if np.isclose(midpoint[1], 0):
                assert u.edge_tags[f] == BoundaryPart.CLAMPED
            elif np.isclose(midpoint[0], 1):
                assert u.edge_tags[f] == BoundaryPart.SIMPLY_SUPPORTED
            elif np.isclose(midpoint[1], 1):
                assert u.edge_tags[f] == BoundaryPart.FREE
            else:
                assert u.edge_tags[f] == BoundaryPart.SIMPLY_SUPPORTED

    def test_generation_increments(self):
        m = msh.triangle_mesh()
        r = msh.refine_nvb(m, [0])
        assert np.all(r.generation == 1)
        r2 = msh.uniform_refine(r)
        assert np.all(r2.generation == 3)  # two bisections per triangle


class TestShapeRegularity:
    def test_min_angle_stable_over_uniform_refinement(self):
        m0 = msh.square_mesh("clamped")
        m = m0
        base = m0.min_angle()
        for _ in range(5):
            m = msh.uniform_refine(m)
            assert m.min_angle() >= base - 1e-12

    def test_similarity_classes_bounded(self):
        rng = np.random.default_rng(11)
        m = msh.square_mesh("clamped")
        classes_round2 = None
        for k in range(10):
            marked = rng.choice(m.num_triangles,
                                size=max(1, m.num_triangles // 3), replace=False)
            m = msh.refine_nvb(m, marked)
            if k == 1:
                classes_round2 = len(m.similarity_classes())
        assert len(m.similarity_classes()) <= 4 * classes_round2

    def test_matching_condition_on_presets(self):
        for preset in (msh.square_mesh("clamped"), msh.preset_mesh("lshape", "mixed")):
            assert len(preset.matching_neighbor_violations()) == 0
            u = msh.uniform_refine(preset)
            assert len(u.matching_neighbor_violations()) == 0


class TestAncestry:
    def test_ancestor_map_composition(self):
        m = msh.square_mesh("clamped")
        u1 = msh.uniform_refine(m)
        u2 = msh.refine_nvb(u1, [0, 3])
        amap = msh.ancestor_map(u2, m)
        # centroids of descendants must lie inside their ancestor
        for t in range(u2.num_triangles):
            anc = amap[t]
            c = u2.centroids[t]
            P = m.vertices[m.triangles[anc]]
            A = np.vstack([np.ones(3), P.T])
            lam = np.linalg.solve(A, np.array([1.0, c[0], c[1]]))
            assert lam.min() > -1e-12

    def test_ancestor_map_rejects_unrelated(self):
        m1 = msh.square_mesh("clamped")
        m2 = msh.lshape_mesh("clamped")
        with pytest.raises(MeshError):
            msh.ancestor_map(m2, m1)


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        m = msh.uniform_refine(msh.preset_mesh("lshape", "mixed"))
        path = tmp_path / "mesh.json"
        msh.save_mesh(m, path)
        m2 = msh.load_mesh(path)
        assert np.array_equal(m2.vertices, m.vertices)
        assert np.array_equal(m2.triangles, m.triangles)
        assert np.array_equal(m2.refedge, m.refedge)
        assert np.array_equal(m2.edge_tags, m.edge_tags)

    def test_json_schema(self, tmp_path):
        m = msh.square_mesh("clamped")
        path = tmp_path / "mesh.json"
        msh.save_mesh(m, path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"vertices", "triangles", "boundary"}
        assert all(len(row) == 4 for row in doc["triangles"])
        assert all(set(seg) == {"segment", "tag"} for seg in doc["boundary"])

    def test_hash_stable_and_sensitive(self):
        m = msh.square_mesh("clamped")
        assert msh.mesh_hash(m) == msh.mesh_hash(msh.square_mesh("clamped"))
        assert msh.mesh_hash(m) != msh.mesh_hash(msh.square_mesh("free"))


class TestMarkSetInput:
    def test_refine_accepts_mark_object(self):
        from plate_afem.estimator import MarkSet

        m = msh.square_mesh("clamped")
        mk = MarkSet(indices=np.array([0]), converged=False)
        r = msh.refine_nvb(m, mk)
        assert r.num_triangles == 4


class TestBisectionAccounting:
    def test_triangle_vertex_accounting(self):
        # each split edge contributes one new vertex and one extra triangle
        # per adjacent triangle
        rng = np.random.default_rng(17)
        m = msh.preset_mesh("lshape", "mixed")
        for _ in range(5):
            marked = rng.choice(m.num_triangles,
                                size=max(1, m.num_triangles // 3), replace=False)
            r = msh.refine_nvb(m, marked)
            new_vertices = r.num_vertices - m.num_vertices
            split_edges = np.nonzero(r.vertex_parent_edge >= 0)[0]
            assert len(split_edges) == new_vertices
            split_edge_ids = r.vertex_parent_edge[split_edges]
            boundary_splits = int(np.sum(m.boundary_edge_mask[split_edge_ids]))
            assert r.num_triangles == (m.num_triangles + 2 * new_vertices
                                       - boundary_splits)
            m = r
