import numpy as np
import pytest

from voxfuse.errors import BudgetError
from voxfuse.volume import GridConfig, load_volume, new_volume, save_volume


def test_new_volume_empty_initialization():
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.1, dims=(2, 2, 2), num_classes=2, feature_dim=4)
    vol = new_volume(cfg)
    assert vol.weight.shape == (2, 2, 2)
    assert np.all(vol.weight == 0)
    assert np.all(vol.tsdf == 1.0)
    assert np.all(vol.class_probs == 0)
    assert np.all(vol.lang_feat == 0)
    assert np.all(vol.feat_weight == 0)


def test_zero_voxel_size_rejected():
    with pytest.raises(ValueError):
        GridConfig(origin=(0, 0, 0), voxel_size=0.0, dims=(2, 2, 2), num_classes=1, feature_dim=1)


@pytest.mark.parametrize("dims", [(0, 2, 2), (2, -1, 2)])
def test_bad_dims_rejected(dims):
    with pytest.raises(ValueError):
        GridConfig(origin=(0, 0, 0), voxel_size=0.1, dims=dims, num_classes=1, feature_dim=1)


def test_truncation_default_and_floor():
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.04, dims=(4, 4, 4), num_classes=1, feature_dim=1)
    assert cfg.truncation == pytest.approx(0.12)
    with pytest.raises(ValueError):
        GridConfig(origin=(0, 0, 0), voxel_size=0.04, dims=(4, 4, 4),
                   num_classes=1, feature_dim=1, truncation=0.02)


def test_day1_grid_fits_4gb_budget():
    # 128 x 53 x 71 at 4 cm with production-scale channel counts
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.04, dims=(128, 53, 71),
                     num_classes=100, feature_dim=512)
    vol = new_volume(cfg, memory_budget=4 * 1024**3)
    assert vol.lang_feat.shape == (128, 53, 71, 512)


def test_budget_rejects_oversized_grid():
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.02, dims=(251, 100, 136),
                     num_classes=100, feature_dim=512)
    with pytest.raises(BudgetError):
        new_volume(cfg, memory_budget=4 * 1024**3)


def test_volume_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    cfg = GridConfig(origin=(-0.1, 0.2, 0.0), voxel_size=0.05, dims=(3, 4, 5),
                     num_classes=2, feature_dim=3)
    vol = new_volume(cfg)
    vol.tsdf[:] = rng.uniform(-1, 1, cfg.dims)
    vol.weight[:] = rng.uniform(0, 5, cfg.dims)
    vol.feat_weight[:] = rng.uniform(0, 5, cfg.dims)
    vol.class_probs[:] = rng.random(vol.class_probs.shape, dtype=np.float32)
    vol.lang_feat[:] = rng.random(vol.lang_feat.shape, dtype=np.float32)
    save_volume(vol, tmp_path / "v.mvol")
    back = load_volume(tmp_path / "v.mvol")
    assert back.config == cfg
    np.testing.assert_array_equal(back.tsdf, vol.tsdf)
    np.testing.assert_array_equal(back.weight, vol.weight)
    np.testing.assert_array_equal(back.class_probs, vol.class_probs)
    np.testing.assert_array_equal(back.lang_feat, vol.lang_feat)
    np.testing.assert_array_equal(back.feat_weight, vol.feat_weight)


def test_save_volume_deterministic(tmp_path):
    cfg = GridConfig(origin=(0, 0, 0), voxel_size=0.1, dims=(2, 2, 2), num_classes=2, feature_dim=2)
    vol = new_volume(cfg)
    save_volume(vol, tmp_path / "a.mvol")
    save_volume(vol, tmp_path / "b.mvol")
    assert (tmp_path / "a.mvol").read_bytes() == (tmp_path / "b.mvol").read_bytes()
