"""Feature backbones.

A backbone is a callable mapping one normalized RGB image array
(h x w x 3, float64) to an H x W x C feature grid matching the
manifest's declared grid. Two are built in:

  toy-patch   offline and deterministic: mean-pools the image into the
              declared patch grid and lifts 3 channels to C with a
              fixed random projection. Works for any grid; intended for
              fixtures and tests.
  vit-b16     pretrained ViT-B/16 patch embeddings via torchvision.
              Requires grid 14 x 14 x 768 and downloadable weights;
              any import or weight-loading failure aborts.
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

Backbone = Callable[[np.ndarray], np.ndarray]

_TOY_PROJECTION_SEED = 1719


class BackboneError(RuntimeError):
    """The requested backbone cannot be constructed or run."""


def _toy_patch(grid: Tuple[int, int, int]) -> Backbone:
    h, w, c = grid
    rng = np.random.default_rng(_TOY_PROJECTION_SEED)
    projection = rng.normal(size=(3, c)) / np.sqrt(3.0)

    def run(image: np.ndarray) -> np.ndarray:
        if image.ndim != 3 or image.shape[2] != 3:
            raise BackboneError(
                f"toy-patch expects h x w x 3 input, got {image.shape}"
            )
        ih, iw = image.shape[:2]
        if ih < h or iw < w:
            raise BackboneError(
                f"image {ih}x{iw} smaller than the {h}x{w} patch grid"
            )
        row_edges = np.linspace(0, ih, h + 1).astype(int)
        col_edges = np.linspace(0, iw, w + 1).astype(int)
        pooled = np.empty((h, w, 3))
        for i in range(h):
            for j in range(w):
                block = image[
                    row_edges[i] : row_edges[i + 1],
                    col_edges[j] : col_edges[j + 1],
                ]
                pooled[i, j] = block.mean(axis=(0, 1))
        return pooled @ projection

    return run


def _vit_b16(grid: Tuple[int, int, int]) -> Backbone:
    if grid != (14, 14, 768):
        raise BackboneError(
            f"vit-b16 emits a 14x14x768 grid; manifest declares {grid}"
        )
    try:
        import torch
        from torchvision.models import ViT_B_16_Weights, vit_b_16
    except ImportError as e:
        raise BackboneError(f"backbone load failure: {e}") from e
    try:
        model = vit_b_16(weights=ViT_B_16_Weights.IMAGENET1K_V1)
    except Exception as e:  # weight download or checkpoint failures abort
        raise BackboneError(f"backbone load failure: {e}") from e
    model.eval()

    def run(image: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = torch.from_numpy(image.astype(np.float32)).permute(2, 0, 1)
            x = torch.nn.functional.interpolate(
                x.unsqueeze(0), size=(224, 224), mode="bilinear"
            )
            patches = model._process_input(x)
            cls = model.class_token.expand(1, -1, -1)
            tokens = torch.cat([cls, patches], dim=1)
            encoded = model.encoder(tokens)[:, 1:]  # drop the class token
            return (
                encoded.reshape(14, 14, 768).to(torch.float64).cpu().numpy()
            )

    return run


_REGISTRY = {
    "toy-patch": _toy_patch,
    "vit-b16": _vit_b16,
}


def get_backbone(name: str, grid: Tuple[int, int, int]) -> Backbone:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise BackboneError(
            f"unknown backbone {name!r}; available: {sorted(_REGISTRY)}"
        ) from None
    return factory(grid)
