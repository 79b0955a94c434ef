import numpy as np
import pytest

from voxfuse.segmentation import (
    LabelVolume,
    build_inventory,
    flood_fill,
    label_voxels,
    load_inventory,
    save_inventory,
)
from voxfuse.synthkit import oracle_components
from voxfuse.volume import GridConfig, new_volume


def make_vol(dims=(4, 4, 4), num_classes=3, feature_dim=4):
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.04, dims=dims,
                     num_classes=num_classes, feature_dim=feature_dim)
    return new_volume(cfg)


def label_volume(arr):
    arr = np.asarray(arr, dtype=np.int32)
    return LabelVolume(dims=arr.shape, labels=arr)


def random_labels(rng, max_dim=32, num_classes=4):
    dims = tuple(rng.integers(3, max_dim + 1, size=3))
    labels = rng.integers(-1, num_classes, size=dims).astype(np.int32)
    return label_volume(labels)


def partition_of(segments, label_vol):
    dims = label_vol.labels.shape
    strides = np.array([dims[1] * dims[2], dims[2], 1])
    return {frozenset(int(v @ strides) for v in seg.voxels) for seg in segments}


class TestLabelVoxels:
    def test_argmax(self):
        vol = make_vol((1, 1, 1), num_classes=2)
        vol.class_probs[0, 0, 0] = (0.2, 0.8)
        vol.feat_weight[0, 0, 0] = 2.0
        assert label_voxels(vol).labels[0, 0, 0] == 1

    def test_tie_breaks_to_lowest_class(self):
        vol = make_vol((1, 1, 1), num_classes=2)
        vol.class_probs[0, 0, 0] = (0.5, 0.5)
        vol.feat_weight[0, 0, 0] = 1.0
        assert label_voxels(vol).labels[0, 0, 0] == 0

    def test_unobserved_voxel_unlabeled(self):
        vol = make_vol((1, 1, 1))
        vol.class_probs[0, 0, 0] = (1.0, 0.0, 0.0)
        assert label_voxels(vol).labels[0, 0, 0] == -1

    def test_weight_gate(self):
        vol = make_vol((2, 1, 1))
        vol.class_probs[:, 0, 0] = (0, 1, 0)
        vol.feat_weight[0, 0, 0] = 0.5
        vol.feat_weight[1, 0, 0] = 1.0
        labels = label_voxels(vol, w_min=1.0).labels
        assert labels[0, 0, 0] == -1 and labels[1, 0, 0] == 1


class TestFloodFill:
    def test_singleton(self):
        grid = -np.ones((3, 3, 3), dtype=np.int32)
        grid[1, 1, 1] = 2
        segs = flood_fill(label_volume(grid), min_size=1)
        assert len(segs) == 1
        assert segs[0].class_id == 2 and len(segs[0].voxels) == 1

    def test_two_blobs_with_gap(self):
        grid = -np.ones((7, 3, 3), dtype=np.int32)
        grid[0:2, 0, 0] = 1
        grid[4:7, 0, 0] = 1
        segs = flood_fill(label_volume(grid), min_size=1)
        assert len(segs) == 2
        # larger component first within the class
        assert len(segs[0].voxels) == 3 and len(segs[1].voxels) == 2

    def test_diagonal_touch_splits_under_6_connectivity(self):
        grid = -np.ones((2, 2, 1), dtype=np.int32)
        grid[0, 0, 0] = 1
        grid[1, 1, 0] = 1
        assert len(flood_fill(label_volume(grid), min_size=1)) == 2
        assert len(flood_fill(label_volume(grid), min_size=1, connectivity=26)) == 1

    def test_min_size_discards_small(self):
        grid = -np.ones((8, 1, 1), dtype=np.int32)
        grid[0:5, 0, 0] = 1
        grid[6:8, 0, 0] = 1
        segs = flood_fill(label_volume(grid), min_size=5)
        assert len(segs) == 1 and len(segs[0].voxels) == 5

    def test_different_classes_do_not_merge(self):
        grid = np.zeros((2, 1, 1), dtype=np.int32)
        grid[1, 0, 0] = 1
        assert len(flood_fill(label_volume(grid), min_size=1)) == 2

    def test_matches_union_find_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            lv = random_labels(rng, max_dim=16)
            segs = flood_fill(lv, min_size=1)
            got = partition_of(segs, lv)
            want = set(oracle_components(lv))
            assert got == want

    def test_partition_covers_surviving_voxels(self):
        rng = np.random.default_rng(1)
        lv = random_labels(rng, max_dim=12)
        min_size = 3
        segs = flood_fill(lv, min_size=min_size)
        all_parts = oracle_components(lv)
        survivors = {p for p in all_parts if len(p) >= min_size}
        assert partition_of(segs, lv) == survivors

    def test_deterministic_ordering(self):
        rng = np.random.default_rng(2)
        lv = random_labels(rng, max_dim=10)
        a = flood_fill(lv, min_size=1)
        b = flood_fill(lv, min_size=1)
        assert [s.seed for s in a] == [s.seed for s in b]
        assert [(s.class_id, len(s.voxels)) for s in a] == [
            (s.class_id, len(s.voxels)) for s in b
        ]
        # ordered by (class, size desc, seed)
        keys = [(s.class_id, -len(s.voxels), s.seed) for s in a]
        assert keys == sorted(keys)

    def test_bad_connectivity_rejected(self):
        with pytest.raises(ValueError):
            flood_fill(label_volume(-np.ones((2, 2, 2), dtype=np.int32)), connectivity=18)


class TestInventory:
    def build(self):
        vol = make_vol((7, 3, 3), num_classes=3, feature_dim=4)
        rng = np.random.default_rng(3)
        vol.lang_feat[:] = rng.random((7, 3, 3, 4), dtype=np.float32) + 0.05
        vol.feat_weight[:] = 1.0
        grid = -np.ones((7, 3, 3), dtype=np.int32)
        grid[0:2, 0, 0] = 1  # chair blob A
        grid[4:7, 0, 0] = 1  # chair blob B (bigger)
        grid[3, 2, 2] = 2  # table singleton
        segs = flood_fill(label_volume(grid), min_size=1)
        inv = build_inventory(segs, vol, ["floor", "chair", "table"])
        return vol, inv

    def test_auto_names_count_within_class(self):
        _, inv = self.build()
        assert [s.auto_name for s in inv.segments] == ["chair:1", "chair:2", "table:1"]

    def test_singleton_centroid_is_voxel_center(self):
        vol, inv = self.build()
        table = inv.segments[-1]
        np.testing.assert_allclose(table.centroid, vol.config.voxel_center((3, 2, 2)))

    def test_merged_centroid_is_mean(self):
        vol, inv = self.build()
        seg = inv.segments[0]
        centers = np.stack([vol.config.voxel_center(v) for v in seg.voxels])
        np.testing.assert_allclose(seg.centroid, centers.mean(axis=0))

    def test_features_unit_norm_and_aligned(self):
        vol, inv = self.build()
        for seg in inv.segments:
            assert seg.voxel_feats.shape == (len(seg.voxels), 4)
            np.testing.assert_allclose(
                np.linalg.norm(seg.voxel_feats, axis=1), 1.0, atol=1e-4
            )

    def test_ids_unique_and_voxels_disjoint(self):
        _, inv = self.build()
        ids = [s.segment_id for s in inv.segments]
        assert len(set(ids)) == len(ids)
        seen = set()
        for s in inv.segments:
            for v in map(tuple, s.voxels):
                assert v not in seen
                seen.add(v)

    def test_round_trip(self, tmp_path):
        _, inv = self.build()
        inv.segments[0].user_name = "Joe's chair"
        inv.segments[0].remembered = True
        inv.segments[0].insitu_class = 1
        save_inventory(inv, tmp_path)
        back = load_inventory(tmp_path)
        assert back.class_names == inv.class_names
        assert back.grid == inv.grid
        assert len(back.segments) == len(inv.segments)
        for a, b in zip(back.segments, inv.segments):
            assert (a.segment_id, a.class_id, a.auto_name, a.user_name,
                    a.remembered, a.insitu_class) == (
                b.segment_id, b.class_id, b.auto_name, b.user_name,
                b.remembered, b.insitu_class)
            np.testing.assert_array_equal(a.voxels, b.voxels)
            np.testing.assert_allclose(a.centroid, b.centroid)
            np.testing.assert_array_equal(a.voxel_feats, b.voxel_feats)

    def test_out_of_grid_voxel_rejected(self):
        vol = make_vol((2, 2, 2))
        from voxfuse.segmentation import RawSegment

        bad = RawSegment(class_id=0, voxels=np.array([[5, 0, 0]]), seed=(5, 0, 0))
        with pytest.raises(ValueError):
            build_inventory([bad], vol, ["a", "b", "c"])
