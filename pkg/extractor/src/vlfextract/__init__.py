"""vlf-extract: patch-tiled image embeddings and semantic maps as .vlf files."""

__version__ = "0.1.0"

from .backends import (
    BackendError,
    ClipBackend,
    ConstantSegmenter,
    HashImageBackend,
    HashTextBackend,
)
from .extract import ExtractorConfig, embed_text, extract, find_frames
from .tiling import TilingConfig, iter_patches, load_resized
