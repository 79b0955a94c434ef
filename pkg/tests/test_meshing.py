from collections import Counter

import numpy as np
import pytest

from voxfuse.meshing import (
    Mesh,
    _EDGES,
    empty_mesh,
    export_mesh,
    extract_mesh,
    import_mesh,
    resample_vertex_features,
    trilinear_sample,
)
from voxfuse.volume import GridConfig, new_volume


def make_volume(dims, voxel=0.04, origin=None, num_classes=2, feature_dim=4):
    if origin is None:
        origin = (0.0, 0.0, 0.0)
    cfg = GridConfig(origin=origin, voxel_size=voxel, dims=dims,
                     num_classes=num_classes, feature_dim=feature_dim)
    return new_volume(cfg)


def fill_sdf(vol, fn):
    centers = vol.config.voxel_centers().reshape(vol.config.dims + (3,))
    vol.tsdf[:] = np.clip(fn(centers) / vol.config.truncation, -1, 1)
    vol.weight[:] = 1.0


def edge_counts(mesh):
    cnt = Counter()
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            cnt[tuple(sorted(e))] += 1
    return cnt


def euler_characteristic(mesh):
    return mesh.num_vertices - len(edge_counts(mesh)) + mesh.num_triangles


class TestExtract:
    def test_all_positive_gives_empty_mesh(self):
        vol = make_volume((6, 6, 6))
        vol.weight[:] = 1.0
        mesh = extract_mesh(vol)
        assert mesh.num_vertices == 0 and mesh.num_triangles == 0

    def test_sphere_vertices_on_surface(self):
        vol = make_volume((35, 35, 35), origin=(-0.7, -0.7, -0.7))
        fill_sdf(vol, lambda p: np.linalg.norm(p, axis=-1) - 0.5)
        mesh = extract_mesh(vol)
        assert mesh.num_vertices > 1000
        err = np.abs(np.linalg.norm(mesh.vertices, axis=1) - 0.5)
        frac = np.mean(err <= vol.config.voxel_size)
        assert frac >= 0.99
        assert euler_characteristic(mesh) == 2
        assert set(edge_counts(mesh).values()) == {2}  # watertight

    def test_single_negative_voxel_closed_surface(self):
        vol = make_volume((5, 5, 5))
        vol.weight[:] = 1.0
        vol.tsdf[:] = 1.0
        vol.tsdf[2, 2, 2] = -1.0
        mesh = extract_mesh(vol)
        # octahedron around the voxel: 6 verts, 8 faces, Euler characteristic 2
        assert mesh.num_vertices == 6
        assert mesh.num_triangles == 8
        assert euler_characteristic(mesh) == 2

    def test_cells_touching_unobserved_voxels_skipped(self):
        vol = make_volume((5, 5, 5))
        vol.weight[:] = 1.0
        vol.tsdf[:] = 1.0
        vol.tsdf[2, 2, 2] = -1.0
        vol.weight[2, 2, 3] = 0.0  # one corner of some cells unobserved
        mesh = extract_mesh(vol)
        full = extract_mesh(make_volume((5, 5, 5)))
        assert mesh.num_triangles < 8
        assert full.num_triangles == 0

    def test_no_zero_crossing_with_negative_region_unobserved(self):
        vol = make_volume((5, 5, 5))
        vol.weight[:] = 1.0
        vol.tsdf[2, 2, 2] = -1.0
        vol.weight[2, 2, 2] = 0.0
        assert extract_mesh(vol).num_triangles == 0

    def test_vertices_lie_on_sign_change_edges(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            vol = make_volume((8, 8, 8))
            vol.weight[:] = 1.0
            vol.tsdf[:] = rng.uniform(-1, 1, size=(8, 8, 8))
            mesh = extract_mesh(vol)
            if mesh.num_vertices == 0:
                continue
            # every vertex on a lattice edge: exactly two coordinates at
            # half-voxel lattice positions, the third in between
            g = (mesh.vertices - np.asarray(vol.config.origin)) / vol.config.voxel_size - 0.5
            snapped = np.isclose(g, np.round(g), atol=1e-9)
            assert np.all(snapped.sum(axis=1) >= 2)
            # and the interpolated coordinate bracketed by adjacent lattice points
            free = ~snapped
            assert np.all(g[free] >= -1e-9) and np.all(
                g[free] <= np.array(vol.config.dims)[np.nonzero(free)[1]] - 1 + 1e-9
            )

    def test_smooth_random_fields_watertight(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            vol = make_volume((12, 12, 12), origin=(-0.24, -0.24, -0.24))
            centers = vol.config.voxel_centers().reshape(12, 12, 12, 3)
            sdf = np.full((12, 12, 12), np.inf)
            for _ in range(3):
                c = rng.uniform(-0.15, 0.15, 3)
                r = rng.uniform(0.06, 0.14)
                sdf = np.minimum(sdf, np.linalg.norm(centers - c, axis=-1) - r)
            vol.tsdf[:] = np.clip(sdf / vol.config.truncation, -1, 1)
            vol.weight[:] = 1.0
            # keep the zero set away from the grid boundary
            if np.any(vol.tsdf[[0, -1], :, :] < 0) or np.any(vol.tsdf[:, [0, -1], :] < 0) \
                    or np.any(vol.tsdf[:, :, [0, -1]] < 0):
                continue
            mesh = extract_mesh(vol)
            if mesh.num_triangles:
                assert set(edge_counts(mesh).values()) == {2}

    def test_deterministic_extraction(self, tmp_path):
        vol = make_volume((20, 20, 20), origin=(-0.4, -0.4, -0.4))
        fill_sdf(vol, lambda p: np.linalg.norm(p, axis=-1) - 0.3)
        export_mesh(extract_mesh(vol), tmp_path / "a.vmesh")
        export_mesh(extract_mesh(vol), tmp_path / "b.vmesh")
        assert (tmp_path / "a.vmesh").read_bytes() == (tmp_path / "b.vmesh").read_bytes()


class TestVmeshRoundTrip:
    def test_empty(self, tmp_path):
        export_mesh(empty_mesh(), tmp_path / "m.vmesh")
        back = import_mesh(tmp_path / "m.vmesh")
        assert back.num_vertices == 0 and back.num_triangles == 0

    def test_single_triangle(self, tmp_path):
        mesh = Mesh(np.array([[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]), np.array([[0, 1, 2]]))
        export_mesh(mesh, tmp_path / "m.vmesh")
        back = import_mesh(tmp_path / "m.vmesh")
        assert back.num_vertices == 3 and back.num_triangles == 1
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-7)

    def test_attributes(self, tmp_path):
        rng = np.random.default_rng(2)
        feats = rng.standard_normal((3, 4)).astype(np.float32)
        mesh = Mesh(
            rng.standard_normal((3, 3)),
            np.array([[0, 1, 2]]),
            vertex_feats=feats,
            vertex_class=np.array([1, -1, 0], dtype=np.int32),
            vertex_heat=np.array([0.1, 0.5, 1.0], dtype=np.float32),
        )
        export_mesh(mesh, tmp_path / "m.vmesh")
        back = import_mesh(tmp_path / "m.vmesh")
        np.testing.assert_array_equal(back.vertex_feats, feats)
        np.testing.assert_array_equal(back.vertex_class, mesh.vertex_class)
        np.testing.assert_array_equal(back.vertex_heat, mesh.vertex_heat)


class TestTrilinear:
    def test_lattice_points_exact(self):
        rng = np.random.default_rng(0)
        grid = rng.standard_normal((4, 5, 6, 3))
        got = trilinear_sample(grid, np.array([[1, 2, 3], [0, 0, 0], [3, 4, 5]]))
        np.testing.assert_allclose(got[0], grid[1, 2, 3], atol=1e-12)
        np.testing.assert_allclose(got[2], grid[3, 4, 5], atol=1e-12)

    def test_affine_field_reproduced(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal(3)
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in (5, 6, 7)], indexing="ij"), axis=-1)
        grid = idx @ a.T + b
        pts = rng.uniform(0, [4, 5, 6], size=(40, 3))
        want = pts @ a.T + b
        np.testing.assert_allclose(trilinear_sample(grid, pts), want, atol=1e-5)


class TestResample:
    def make_fused(self):
        vol = make_volume((6, 6, 6), num_classes=3, feature_dim=4)
        vol.weight[:] = 2.0
        vol.feat_weight[:] = 2.0
        rng = np.random.default_rng(5)
        vol.lang_feat[:] = rng.random((6, 6, 6, 4), dtype=np.float32) + 0.1
        vol.class_probs[:] = rng.random((6, 6, 6, 3), dtype=np.float32)
        return vol

    def test_vertex_at_voxel_center(self):
        vol = self.make_fused()
        center = vol.config.voxel_center((2, 3, 1))
        mesh = Mesh(np.array([center]), np.zeros((0, 3), dtype=np.int64))
        resample_vertex_features(vol, mesh)
        want = vol.lang_feat[2, 3, 1].astype(np.float64)
        want /= np.linalg.norm(want)
        np.testing.assert_allclose(mesh.vertex_feats[0], want, atol=1e-6)
        assert mesh.vertex_class[0] == vol.class_probs[2, 3, 1].argmax()

    def test_zero_weight_region_unlabeled(self):
        vol = self.make_fused()
        vol.feat_weight[:] = 0.0
        center = vol.config.voxel_center((2, 2, 2))
        mesh = Mesh(np.array([center]), np.zeros((0, 3), dtype=np.int64))
        resample_vertex_features(vol, mesh)
        assert mesh.vertex_class[0] == -1

    def test_outside_vertex_clamped(self):
        vol = self.make_fused()
        mesh = Mesh(np.array([[-10.0, -10.0, -10.0]]), np.zeros((0, 3), dtype=np.int64))
        resample_vertex_features(vol, mesh)
        want = vol.lang_feat[0, 0, 0].astype(np.float64)
        want /= np.linalg.norm(want)
        np.testing.assert_allclose(mesh.vertex_feats[0], want, atol=1e-6)

    def test_features_unit_norm(self):
        vol = self.make_fused()
        fill_sdf(vol, lambda p: np.linalg.norm(p - 0.12, axis=-1) - 0.08)
        vol.weight[:] = 1.0
        mesh = extract_mesh(vol)
        resample_vertex_features(vol, mesh)
        np.testing.assert_allclose(
            np.linalg.norm(mesh.vertex_feats, axis=1), 1.0, atol=1e-4
        )

    def test_class_matches_voxel_argmax_at_centers(self):
        vol = self.make_fused()
        idx = [(0, 0, 0), (5, 5, 5), (1, 4, 2)]
        verts = np.array([vol.config.voxel_center(i) for i in idx])
        mesh = Mesh(verts, np.zeros((0, 3), dtype=np.int64))
        resample_vertex_features(vol, mesh)
        for row, i in enumerate(idx):
            assert mesh.vertex_class[row] == vol.class_probs[i].argmax()


def test_triangle_table_references_only_crossing_edges():
    from voxfuse.meshing import TRIANGLE_TABLE

    for case in range(256):
        neg = [(case >> c) & 1 for c in range(8)]
        for tri in TRIANGLE_TABLE[case]:
            for e in tri:
                a, b = _EDGES[e]
                assert neg[a] != neg[b]
