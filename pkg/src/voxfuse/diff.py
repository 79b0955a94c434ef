"""Volumetric diff: which personalized objects are unchanged vs missing
between two scans, decided by the in-situ classifier with no spatial alignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .insitu.model import InSituModel
from .insitu.training import classify_segment
from .segmentation import Inventory


@dataclass
class DiffReport:
    prev_version: int
    curr_version: int
    unchanged: list[dict] = field(default_factory=list)
    # each: {label, prev_segment_id, curr_segment_id, confidence}
    missing: list[dict] = field(default_factory=list)
    # each: {label, prev_segment_id, prev_centroid}

    def to_dict(self) -> dict:
        return {
            "prev_version": self.prev_version,
            "curr_version": self.curr_version,
            "unchanged": self.unchanged,
            "missing": self.missing,
        }


def diff_inventories(
    model: InSituModel,
    prev_inv: Inventory,
    curr_inv: Inventory,
    rng: np.random.Generator | None = None,
    votes: int = 16,
    prev_version: int = 0,
    curr_version: int = 0,
) -> DiffReport:
    """Classify every current segment and claim previous labels greedily.

    Each personalized label of the previous scan is claimed by at most one
    current segment, highest confidence first; unclaimed labels are reported
    missing at their previous centroid.
    """
    prev_by_label: dict[str, int] = {}
    for seg in sorted(prev_inv.personalized(), key=lambda s: s.segment_id):
        prev_by_label.setdefault(seg.label, seg.segment_id)
    if not prev_by_label:  # nothing was tracked: vacuous diff
        return DiffReport(prev_version=prev_version, curr_version=curr_version)
    if not model.trained:
        raise ValueError("diff needs a trained model")
    rng = rng or np.random.default_rng()
    model_labels = set(model.registry[1:])
    if model_labels != set(prev_by_label):
        raise ValueError(
            f"model registry {sorted(model_labels)} does not match previous "
            f"personalized labels {sorted(prev_by_label)}"
        )

    candidates = []
    for seg in curr_inv.segments:
        label, confidence = classify_segment(model, seg, m=votes, rng=rng)
        if label is not None and label in prev_by_label:
            candidates.append((confidence, seg.segment_id, label))
    candidates.sort(key=lambda t: (-t[0], t[1]))

    claimed_labels: dict[str, tuple[int, float]] = {}
    used_segments: set[int] = set()
    for confidence, seg_id, label in candidates:
        if label in claimed_labels or seg_id in used_segments:
            continue
        claimed_labels[label] = (seg_id, confidence)
        used_segments.add(seg_id)

    report = DiffReport(prev_version=prev_version, curr_version=curr_version)
    for label, prev_id in sorted(prev_by_label.items(), key=lambda kv: kv[1]):
        if label in claimed_labels:
            seg_id, confidence = claimed_labels[label]
            report.unchanged.append(
                {
                    "label": label,
                    "prev_segment_id": prev_id,
                    "curr_segment_id": seg_id,
                    "confidence": round(float(confidence), 6),
                }
            )
        else:
            centroid = prev_inv.get(prev_id).centroid
            report.missing.append(
                {
                    "label": label,
                    "prev_segment_id": prev_id,
                    "prev_centroid": [float(x) for x in centroid],
                }
            )
    return report


def diff_versions(model, prev, curr, rng=None, votes: int = 16) -> DiffReport:
    """Diff two committed SceneVersions (store flavor of diff_inventories)."""
    return diff_inventories(
        model,
        prev.load_inventory(),
        curr.load_inventory(),
        rng=rng,
        votes=votes,
        prev_version=prev.version_id,
        curr_version=curr.version_id,
    )
