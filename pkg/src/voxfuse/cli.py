"""Command-line pipeline: fuse, segment, query, label, train, diff, serve, synth.

Exit codes: 0 success, 1 user error (bad input, missing files), 2 internal.
`--seed` makes every stochastic step deterministic, including commit
timestamps, so repeated invocations produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path

import click
import numpy as np

from . import __version__
from .actions import apply_merge, apply_remember, apply_rename
from .diff import diff_versions
from .errors import VoxfuseError
from .insitu.training import TrainConfig, fit_inventory
from .meshing import export_mesh
from .pipeline import fuse_frames, resegment
from .query import build_negative_set, embed_query, normalize_heat, rank_segments, score_vertices
from .reports import write_diff_report, write_query_report, write_train_report
from .store import SceneStore

_store_option = click.option(
    "--store", "store_path", envvar="VOXFUSE_STORE", required=True,
    type=click.Path(), help="Scene store root (env: VOXFUSE_STORE).",
)


def _echo_table(rows: list[dict], columns: list[str]) -> None:
    if not rows:
        click.echo("(empty)")
        return
    widths = {c: max(len(c), max(len(str(r.get(c, ""))) for r in rows)) for c in columns}
    click.echo("  ".join(c.ljust(widths[c]) for c in columns))
    for r in rows:
        click.echo("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns))


@click.group(name="voxfuse")
@click.version_option(__version__)
def cli():
    """Multimodal voxel fusion engine: geometry + semantics + language."""


@cli.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@_store_option
@click.option("--scene", default="default", show_default=True)
@click.option("--voxel", default=0.04, show_default=True,
              help="Voxel size in meters (0.02/0.04/0.08/0.16 mirror the reference setups).")
@click.option("--bounds", default=None,
              help="x0,y0,z0:x1,y1,z1 world AABB; derived from depth when omitted.")
@click.option("--budget", default=4 * 1024**3, show_default=True, help="Memory budget, bytes.")
@click.option("--min-size", default=5, show_default=True)
@click.option("--connectivity", default=6, show_default=True, type=click.Choice(["6", "26"]))
@click.option("--seed", default=None, type=int, help="Deterministic run (fixes timestamps).")
@click.option("--json", "as_json", is_flag=True)
def fuse(frames_dir, store_path, scene, voxel, bounds, budget, min_size,
         connectivity, seed, as_json):
    """Fuse a frame-set directory and commit volume + mesh + inventory."""
    if voxel <= 0:
        raise click.UsageError("--voxel must be positive")
    parsed_bounds = None
    if bounds:
        try:
            lo, hi = bounds.split(":")
            parsed_bounds = ([float(x) for x in lo.split(",")], [float(x) for x in hi.split(",")])
        except ValueError:
            raise click.UsageError("--bounds must look like x0,y0,z0:x1,y1,z1")
    store = SceneStore.open_or_create(store_path)
    result = fuse_frames(frames_dir, voxel_size=voxel, bounds=parsed_bounds,
                         memory_budget=budget, min_size=min_size,
                         connectivity=int(connectivity))
    embeddings = Path(frames_dir) / "text_embeddings.vle"
    version_id = store.commit_version(
        scene, result.inventory, result.mesh, volume=result.volume,
        embeddings_path=embeddings if embeddings.exists() else None,
        timestamp=0.0 if seed is not None else None,
    )
    payload = {
        "version_id": version_id,
        "scene": scene,
        "frames": result.frames_used,
        "segments": len(result.inventory.segments),
        "vertices": result.mesh.num_vertices,
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(
            f"version {version_id} committed to scene '{scene}': "
            f"{payload['frames']} frames, {payload['segments']} segments, "
            f"{payload['vertices']} mesh vertices"
        )


@cli.command()
@_store_option
@click.option("--version", "version_id", required=True, type=int)
@click.option("--min-size", default=5, show_default=True)
@click.option("--connectivity", default=6, type=click.Choice(["6", "26"]))
@click.option("--json", "as_json", is_flag=True)
def segment(store_path, version_id, min_size, connectivity, as_json):
    """Recompute the inventory of a committed version from its stored volume."""
    store = SceneStore(store_path)
    version = store.version(version_id)
    vol = version.load_volume()
    names = version.load_inventory().class_names
    inv = resegment(vol, names, min_size=min_size, connectivity=int(connectivity))
    store.update_inventory(version, inv)
    rows = [
        {"id": s.segment_id, "label": s.label,
         "class": names[s.class_id], "voxels": s.voxel_count}
        for s in inv.segments
    ]
    if as_json:
        click.echo(json.dumps({"version_id": version_id, "segments": rows}))
    else:
        _echo_table(rows, ["id", "label", "class", "voxels"])


@cli.command()
@_store_option
@click.option("--version", "version_id", required=True, type=int)
@click.option("--text", required=True)
@click.option("--top-k", default=10, show_default=True)
@click.option("--temperature", default=0.07, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Report directory (default: <store>/reports/v<N>-query).")
@click.option("--json", "as_json", is_flag=True)
def query(store_path, version_id, text, top_k, temperature, out_dir, as_json):
    """Rank segments against a text query; write heat mesh + figure + CSV."""
    if not text.strip():
        raise click.UsageError("--text must be non-empty")
    store = SceneStore(store_path)
    version = store.version(version_id)
    mesh = version.load_mesh()
    if mesh.vertex_feats is None or not len(mesh.vertex_feats):
        raise VoxfuseError("version mesh carries no vertex features")
    inv = version.load_inventory()
    embedder = version.embedder(inv.grid.feature_dim)
    q = embed_query(embedder, text)
    heat = score_vertices(mesh, q, build_negative_set(inv, embedder), temperature)
    display = normalize_heat(heat)
    ranked = rank_segments(mesh, heat, inv, top_k=top_k)

    out = Path(out_dir) if out_dir else Path(store_path) / "reports" / f"v{version_id}-query"
    out.mkdir(parents=True, exist_ok=True)
    mesh.vertex_heat = display.astype(np.float32)
    export_mesh(mesh, out / "heat.vmesh")
    write_query_report(out, text, ranked, display)

    if as_json:
        click.echo(json.dumps({"version_id": version_id, "text": text,
                               "ranked": ranked, "out": str(out)}))
    else:
        _echo_table(
            [{"rank": i, **{k: r[k] for k in ("segment_id", "label", "class")},
              "mean_heat": f"{r['mean_heat']:.4f}"}
             for i, r in enumerate(ranked, 1)],
            ["rank", "segment_id", "label", "class", "mean_heat"],
        )
        click.echo(f"report written to {out}")


@cli.command()
@_store_option
@click.option("--version", "version_id", required=True, type=int)
@click.option("--merge", "merges", multiple=True,
              help='Repeatable: "1,2=new name" merges segments 1 and 2.')
@click.option("--rename", "renames", multiple=True, help='Repeatable: "3=new name".')
@click.option("--remember", "remembers", multiple=True, type=int, help="Repeatable: segment id.")
@click.option("--json", "as_json", is_flag=True)
def label(store_path, version_id, merges, renames, remembers, as_json):
    """Personalize segments: merge fragments, rename labels, remember objects."""
    if not (merges or renames or remembers):
        raise click.UsageError("nothing to do: pass --merge/--rename/--remember")
    store = SceneStore(store_path)
    version = store.version(version_id)
    inv = version.load_inventory()
    try:
        for spec_str in merges:
            ids_part, _, name = spec_str.partition("=")
            ids = [int(x) for x in ids_part.split(",")]
            apply_merge(inv, ids, name)
        for spec_str in renames:
            id_part, _, name = spec_str.partition("=")
            apply_rename(inv, int(id_part), name)
        for sid in remembers:
            apply_remember(inv, sid)
    except KeyError as exc:
        raise VoxfuseError(f"unknown segment: {exc.args[0]}")
    store.update_inventory(version, inv)
    rows = [
        {"id": s.segment_id, "label": s.label, "remembered": s.remembered}
        for s in inv.segments if s.remembered
    ]
    if as_json:
        click.echo(json.dumps({"version_id": version_id, "personalized": rows}))
    else:
        _echo_table(rows, ["id", "label", "remembered"])


@cli.command()
@_store_option
@click.option("--version", "version_id", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--cooldown", default=10, show_default=True)
@click.option("--cap", default=500, show_default=True)
@click.option("--floor", "accuracy_floor", default=0.95, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def train(store_path, version_id, seed, cooldown, cap, accuracy_floor, lr, out_dir, as_json):
    """Train the in-situ classifier on the version's personalized segments."""
    store = SceneStore(store_path)
    version = store.version(version_id)
    inv = version.load_inventory()
    vol = version.load_volume()
    config = TrainConfig(lr=lr, cooldown=cooldown, epoch_cap=cap,
                         accuracy_floor=accuracy_floor)
    model, report = fit_inventory(inv, vol, config, seed=seed)
    store.update_inventory(version, inv)
    store.attach_model(version, model, report)
    out = Path(out_dir) if out_dir else Path(store_path) / "reports" / f"v{version_id}-train"
    write_train_report(out, report)
    payload = {
        "version_id": version_id,
        "epochs_run": report.epochs_run,
        "best_accuracy": report.best_accuracy,
        "stopped_reason": report.stopped_reason,
        "wall_time_s": round(report.wall_time, 3),
        "classes": model.registry,
        "out": str(out),
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(
            f"trained {len(model.registry) - 1} classes in {report.epochs_run} epochs "
            f"({report.wall_time:.1f}s): best accuracy {report.best_accuracy:.3f}, "
            f"stopped by {report.stopped_reason}"
        )


@cli.command("diff")
@_store_option
@click.option("--prev", required=True, type=int)
@click.option("--curr", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--votes", default=16, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def diff_cmd(store_path, prev, curr, seed, votes, out_dir, as_json):
    """Volumetric diff: unchanged vs missing personalized objects."""
    store = SceneStore(store_path)
    prev_v = store.version(prev)
    curr_v = store.version(curr)
    model = prev_v.load_model()
    report = diff_versions(model, prev_v, curr_v,
                           rng=np.random.default_rng(seed), votes=votes)
    out = Path(out_dir) if out_dir else Path(store_path) / "reports" / f"diff-{prev}-{curr}"
    write_diff_report(out, report, prev_inventory=prev_v.load_inventory())
    if as_json:
        click.echo(json.dumps(report.to_dict()))
    else:
        rows = [
            {"status": "unchanged", "label": r["label"],
             "curr segment": r["curr_segment_id"], "confidence": f"{r['confidence']:.3f}"}
            for r in report.unchanged
        ] + [
            {"status": "MISSING", "label": r["label"], "curr segment": "-", "confidence": "-"}
            for r in report.missing
        ]
        _echo_table(rows, ["status", "label", "curr segment", "confidence"])
        click.echo(f"report written to {out}")


@cli.command()
@_store_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8754, show_default=True, type=int)
def serve(store_path, host, port):
    """Serve the scene store over HTTP for the browser UI."""
    from .service import serve as run_service

    store = SceneStore(store_path)
    click.echo(f"serving {store_path} on http://{host}:{port}")
    run_service(store, host=host, port=port)


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--objects", default=8, show_default=True)
@click.option("--views", default=24, show_default=True)
@click.option("--noise", default=0.05, show_default=True)
@click.option("--feature-dim", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--preset", default="scene", type=click.Choice(["scene", "sphere"]),
              show_default=True, help="sphere: single 0.5 m sphere, no floor.")
@click.option("--two-scan", is_flag=True, help="Emit scan_a/ and scan_b/ for diffing.")
@click.option("--remove", "remove_idx", default=None, type=int,
              help="Drop this object from scan_b (implies --two-scan).")
@click.option("--jitter", default=0.0, show_default=True,
              help="Random xy shift of scan_b objects, meters.")
def synth(out_dir, objects, views, noise, feature_dim, seed, preset,
          two_scan, remove_idx, jitter):
    """Generate a synthetic frame set with ground truth."""
    from .synthkit import build_scene, render_frames, sphere_scene, two_scan_fixture

    rng = np.random.default_rng(seed)
    if preset == "sphere":
        scene = sphere_scene(rng, feature_dim=feature_dim, noise_sigma=noise)
        render_frames(scene, out_dir, views, rng)
        click.echo(f"sphere fixture: {views} views written to {out_dir}")
        return
    scene = build_scene(objects, rng, feature_dim=feature_dim, noise_sigma=noise)
    if two_scan or remove_idx is not None:
        truth = two_scan_fixture(scene, out_dir, remove=remove_idx, rng=rng,
                                 n_views=views, jitter=jitter)
        click.echo(
            f"two-scan fixture written to {out_dir}: "
            f"missing={truth['expected_missing'] or 'none'}"
        )
    else:
        render_frames(scene, out_dir, views, rng)
        click.echo(f"{objects} objects, {views} views written to {out_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        return 1
    except (VoxfuseError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
