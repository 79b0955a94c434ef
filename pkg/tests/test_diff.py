import numpy as np
import pytest

from voxfuse.diff import diff_inventories
from voxfuse.insitu.model import init_insitu_model
from voxfuse.insitu.training import TrainConfig, fit_inventory

from test_insitu_train import separable_fixture


def rescan(inv, sigs, rng, noise=0.05, drop_label=None):
    """Fresh inventory as a new scan would produce: new noise, new ids."""
    import copy

    out = copy.deepcopy(inv)
    segments = []
    next_id = 100
    for seg in out.segments:
        if drop_label is not None and seg.label == drop_label:
            continue
        noisy = seg.voxel_feats.astype(np.float64) + rng.normal(
            0, noise, seg.voxel_feats.shape
        )
        noisy /= np.linalg.norm(noisy, axis=1, keepdims=True)
        seg.voxel_feats = noisy.astype(np.float32)
        seg.segment_id = next_id
        seg.user_name = None
        seg.remembered = False
        seg.insitu_class = None
        next_id += 1
        segments.append(seg)
    out.segments = segments
    return out


@pytest.fixture(scope="module")
def trained():
    inv, vol, sigs = separable_fixture(n_objects=5)
    model, _ = fit_inventory(inv, vol, TrainConfig(epoch_cap=300), seed=0)
    return inv, vol, sigs, model


class TestDiff:
    def test_noisy_rescan_all_unchanged(self, trained):
        inv, vol, sigs, model = trained
        rng = np.random.default_rng(1)
        curr = rescan(inv, sigs, rng)
        report = diff_inventories(model, inv, curr, rng=rng,
                                  prev_version=1, curr_version=2)
        assert report.missing == []
        assert {r["label"] for r in report.unchanged} == {
            s.label for s in inv.personalized()
        }

    def test_removed_object_reported_missing(self, trained):
        inv, vol, sigs, model = trained
        rng = np.random.default_rng(2)
        victim = inv.personalized()[2]
        curr = rescan(inv, sigs, rng, drop_label=victim.label)
        report = diff_inventories(model, inv, curr, rng=rng)
        assert [m["label"] for m in report.missing] == [victim.label]
        np.testing.assert_allclose(
            report.missing[0]["prev_centroid"], victim.centroid, atol=1e-9
        )
        assert victim.label not in {r["label"] for r in report.unchanged}

    def test_labels_partition_exactly(self, trained):
        inv, vol, sigs, model = trained
        rng = np.random.default_rng(3)
        for drop_idx in (None, 0, 4):
            drop = inv.personalized()[drop_idx].label if drop_idx is not None else None
            curr = rescan(inv, sigs, rng, drop_label=drop)
            report = diff_inventories(model, inv, curr, rng=rng)
            got = sorted(
                [r["label"] for r in report.unchanged]
                + [m["label"] for m in report.missing]
            )
            assert got == sorted(s.label for s in inv.personalized())
            overlap = {r["label"] for r in report.unchanged} & {
                m["label"] for m in report.missing
            }
            assert not overlap

    def test_one_to_one_claims(self, trained):
        """Duplicate the strongest object in the rescan: only one current
        segment may claim the label."""
        inv, vol, sigs, model = trained
        rng = np.random.default_rng(4)
        curr = rescan(inv, sigs, rng)
        clone = rescan(inv, sigs, rng).segments[1]
        clone.segment_id = 999
        curr.segments.append(clone)
        report = diff_inventories(model, inv, curr, rng=rng)
        claimed = [r["curr_segment_id"] for r in report.unchanged]
        assert len(set(claimed)) == len(claimed)

    def test_vacuous_diff_when_prev_unpersonalized(self):
        inv, vol, _ = separable_fixture(n_objects=2, remember=False)
        model = init_insitu_model(16, ["x"], seed=0)
        report = diff_inventories(model, inv, inv, prev_version=1, curr_version=2)
        assert report.unchanged == [] and report.missing == []

    def test_registry_mismatch_rejected(self, trained):
        inv, vol, sigs, model = trained
        other_inv, other_vol, _ = separable_fixture(n_objects=3, seed=9)
        other_model, _ = fit_inventory(other_inv, other_vol,
                                       TrainConfig(epoch_cap=30), seed=1)
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            diff_inventories(other_model, inv, rescan(inv, sigs, rng), rng=rng)

    def test_untrained_model_rejected(self, trained):
        inv, vol, sigs, _ = trained
        from voxfuse.insitu.training import personalized_labels

        fresh = init_insitu_model(16, personalized_labels(inv), seed=0)
        with pytest.raises(ValueError):
            diff_inventories(fresh, inv, inv)
