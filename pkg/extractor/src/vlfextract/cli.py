"""vlf-extract: turn RGB frames into the fusion engine's .vlf inputs."""

from __future__ import annotations

import sys

import click

from .backends import BackendError, ConstantSegmenter, make_image_backend, make_text_backend
from .extract import ExtractorConfig, embed_text, extract
from .tiling import TilingConfig


@click.group(name="vlf-extract")
def cli():
    """Vision-language feature extraction to engine-ready files."""


def _tiling(patch, stride, resize):
    try:
        w, h = (int(x) for x in resize.lower().split("x"))
    except ValueError:
        raise click.UsageError("--resize must look like 1024x768")
    return TilingConfig(patch_size=patch, stride=stride, resize=(w, h))


@cli.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--backend", default="hash", show_default=True,
              help='"hash" (offline deterministic) or "clip[:model-id]".')
@click.option("--dim", default=16, show_default=True, help="hash backend dimension")
@click.option("--patch", default=256, show_default=True)
@click.option("--stride", default=128, show_default=True)
@click.option("--resize", default="1024x768", show_default=True)
@click.option("--classes", default="object", show_default=True,
              help="Comma-separated class names for the stand-in segmenter.")
def run(frames_dir, out_dir, backend, dim, patch, stride, resize, classes):
    """Extract coarse features + semantic maps for every frame image."""
    config = ExtractorConfig(
        tiling=_tiling(patch, stride, resize),
        image_backend=make_image_backend(backend, dim),
        segmenter=ConstantSegmenter(class_names=classes.split(",")),
        out_dir=out_dir,
    )
    manifest = extract(frames_dir, config)
    click.echo(
        f"{len(manifest['frames'])} frames -> grid "
        f"{manifest['tiling']['grid'][0]}x{manifest['tiling']['grid'][1]}, "
        f"classes: {', '.join(manifest['class_names'])}"
    )


@cli.command("embed-text")
@click.argument("strings", nargs=-1, required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", default="hash", show_default=True)
@click.option("--dim", default=16, show_default=True)
def embed_text_cmd(strings, out_path, backend, dim):
    """Write a keyed embedding table for query texts / class names."""
    table = embed_text(list(strings), out_path, make_text_backend(backend, dim))
    click.echo(f"{len(table)} embeddings -> {out_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        return 1
    except (BackendError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
