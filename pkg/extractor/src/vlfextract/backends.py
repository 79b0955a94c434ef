"""Embedding and segmentation backends.

`hash` is fully deterministic and needs no model weights: it embeds a patch by
seeding an RNG with the bytes of its downsampled pixels. It keeps the whole
pipeline testable offline; the CLIP-family backends load lazily and raise a
clear error when the stack or weights are unavailable.
"""

from __future__ import annotations

import hashlib

import numpy as np


class BackendError(RuntimeError):
    """Model stack missing or model failed to load."""


class HashImageBackend:
    """Deterministic stand-in image embedder (no ML stack required)."""

    def __init__(self, dim: int = 16):
        self.dim = dim

    def embed_patches(self, patches: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(patches), self.dim), dtype=np.float64)
        for i, patch in enumerate(patches):
            small = patch[:: max(1, patch.shape[0] // 8), :: max(1, patch.shape[1] // 8)]
            digest = hashlib.sha256(np.ascontiguousarray(small).tobytes()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.dim)
            out[i] = v / np.linalg.norm(v)
        return out


class HashTextBackend:
    """Deterministic stand-in text embedder, paired with HashImageBackend."""

    def __init__(self, dim: int = 16):
        self.dim = dim

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.dim)
            out[i] = v / np.linalg.norm(v)
        return out


class ClipBackend:
    """OpenCLIP-style image+text embeddings via the transformers stack."""

    def __init__(self, model_id: str = "openai/clip-vit-base-patch32"):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise BackendError(f"transformers/torch unavailable: {exc}") from exc
        try:
            self.model = CLIPModel.from_pretrained(model_id)
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise BackendError(f"could not load {model_id}: {exc}") from exc
        self.model.eval()
        self.dim = self.model.config.projection_dim

    def embed_patches(self, patches: list[np.ndarray]) -> np.ndarray:
        import torch

        with torch.no_grad():
            inputs = self.processor(images=list(patches), return_tensors="pt")
            feats = self.model.get_image_features(**inputs)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        import torch

        with torch.no_grad():
            inputs = self.processor(text=texts, return_tensors="pt", padding=True)
            feats = self.model.get_text_features(**inputs)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)


class ConstantSegmenter:
    """Single-class segmentation stand-in: one-hot x confidence everywhere.

    Real panoptic models emit per-pixel class distributions; when only hard
    labels and confidences are available the same one-hot x confidence layout
    applies, so downstream consumers see one encoding either way.
    """

    def __init__(self, class_names: list[str] | None = None, confidence: float = 1.0):
        self.class_names = class_names or ["object"]
        self.confidence = confidence

    def segment(self, frame: np.ndarray) -> np.ndarray:
        h, w = frame.shape[:2]
        dist = np.zeros((h, w, len(self.class_names)), dtype=np.float32)
        dist[..., 0] = self.confidence
        return dist


def make_image_backend(name: str, dim: int = 16):
    if name == "hash":
        return HashImageBackend(dim)
    if name.startswith("clip"):
        _, _, model_id = name.partition(":")
        return ClipBackend(model_id) if model_id else ClipBackend()
    raise ValueError(f"unknown image backend '{name}'")


def make_text_backend(name: str, dim: int = 16):
    if name == "hash":
        return HashTextBackend(dim)
    if name.startswith("clip"):
        _, _, model_id = name.partition(":")
        return ClipBackend(model_id) if model_id else ClipBackend()
    raise ValueError(f"unknown text backend '{name}'")
