"""Report artifacts: CSV tables plus matplotlib figures rendered to files.

PNG metadata is scrubbed so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def _ensure(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_query_report(out_dir, text: str, ranked: list[dict], heat) -> list[Path]:
    out = _ensure(out_dir)
    csv_path = out / "query_ranked.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rank", "segment_id", "label", "class", "mean_heat", "vertices"])
        for i, r in enumerate(ranked, start=1):
            w.writerow([i, r["segment_id"], r["label"], r["class"],
                        f"{r['mean_heat']:.6f}", r["vertices"]])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    top = ranked[:10]
    ax1.barh([r["label"] for r in top][::-1], [r["mean_heat"] for r in top][::-1],
             color="#c23b22")
    ax1.set_xlabel("mean vertex heat")
    ax1.set_title(f'"{text}"', fontsize=9)
    ax2.hist(heat, bins=40, color="#555555")
    ax2.set_xlabel("display heat")
    ax2.set_ylabel("vertices")
    fig.tight_layout()
    png_path = out / "query_heat.png"
    fig.savefig(png_path, **_SAVE_KW)
    plt.close(fig)
    return [csv_path, png_path]


def write_train_report(out_dir, report) -> list[Path]:
    out = _ensure(out_dir)
    csv_path = out / "train_curve.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss", "accuracy"])
        for i, (loss, acc) in enumerate(zip(report.loss_curve, report.accuracy_curve), 1):
            w.writerow([i, f"{loss:.6f}", f"{acc:.4f}"])

    fig, ax1 = plt.subplots(figsize=(6, 3.2))
    epochs = range(1, len(report.loss_curve) + 1)
    ax1.plot(epochs, report.loss_curve, color="#c23b22", label="loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("cross-entropy", color="#c23b22")
    ax2 = ax1.twinx()
    ax2.plot(epochs, report.accuracy_curve, color="#2b6cb0", label="accuracy")
    ax2.set_ylabel("training accuracy", color="#2b6cb0")
    ax2.set_ylim(0, 1.05)
    ax1.set_title(
        f"stopped: {report.stopped_reason} after {report.epochs_run} epochs "
        f"(best {report.best_accuracy:.3f})",
        fontsize=9,
    )
    fig.tight_layout()
    png_path = out / "train_curves.png"
    fig.savefig(png_path, **_SAVE_KW)
    plt.close(fig)
    return [csv_path, png_path]


def write_diff_report(out_dir, diff, prev_inventory=None) -> list[Path]:
    out = _ensure(out_dir)
    csv_path = out / "diff.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["status", "label", "prev_segment_id", "curr_segment_id", "confidence"])
        for row in diff.unchanged:
            w.writerow(["unchanged", row["label"], row["prev_segment_id"],
                        row["curr_segment_id"], f"{row['confidence']:.4f}"])
        for row in diff.missing:
            w.writerow(["missing", row["label"], row["prev_segment_id"], "", ""])

    fig, ax = plt.subplots(figsize=(5, 5))
    drawn = False
    if prev_inventory is not None:
        unchanged_labels = {r["label"] for r in diff.unchanged}
        for seg in prev_inventory.personalized():
            x, y = seg.centroid[0], seg.centroid[1]
            if seg.label in unchanged_labels:
                ax.scatter([x], [y], s=160, c="#2f855a", marker="o", zorder=3)
            else:
                # missing objects: hollow red contour at the previous location
                ax.scatter([x], [y], s=220, facecolors="none",
                           edgecolors="#c53030", linewidths=2.2, zorder=3)
            ax.annotate(seg.label, (x, y), textcoords="offset points",
                        xytext=(6, 6), fontsize=8)
        drawn = True
    if not drawn:
        for row in diff.missing:
            cx, cy = row["prev_centroid"][0], row["prev_centroid"][1]
            ax.scatter([cx], [cy], s=220, facecolors="none",
                       edgecolors="#c53030", linewidths=2.2)
            ax.annotate(row["label"], (cx, cy), textcoords="offset points",
                        xytext=(6, 6), fontsize=8)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(
        f"v{diff.prev_version} -> v{diff.curr_version}: "
        f"{len(diff.unchanged)} unchanged, {len(diff.missing)} missing",
        fontsize=9,
    )
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    png_path = out / "diff_overlay.png"
    fig.savefig(png_path, **_SAVE_KW)
    plt.close(fig)
    return [csv_path, png_path]
