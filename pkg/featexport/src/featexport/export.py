"""Export operations: images -> feature file, logits -> record file.

Both writers emit the slotood interchange formats directly (the byte
layouts are part of that pipeline's public contract); this package never
imports the consumer. Features are down-cast to little-endian float64 at
the boundary regardless of what the backbone computed in.

Unreadable images are skipped with a logged warning and do not appear in
the output. A backbone emitting a grid that contradicts the manifest
aborts, as does a logits source changing shape between images.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from typing import Callable, List, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbones import Backbone, get_backbone
from .manifest import ExportManifest, ManifestError

log = logging.getLogger("featexport")

FEATURE_MAGIC = b"OCOF"
FEATURE_VERSION = 1

LogitsSource = Callable[[str, np.ndarray], np.ndarray]


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_image(path: str, mean, std) -> Optional[np.ndarray]:
    """Normalized h x w x 3 float64 array, or None if unreadable."""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as e:
        log.warning("skipping unreadable image %s: %s", path, e)
        return None
    return (rgb - np.asarray(mean)) / np.asarray(std)


def feature_bytes(grids: List[np.ndarray], grid_shape) -> bytes:
    h, w, c = grid_shape
    header = FEATURE_MAGIC + struct.pack(
        "<IIIII", FEATURE_VERSION, h, w, c, len(grids)
    )
    body = b"".join(
        np.ascontiguousarray(g, dtype="<f8").tobytes() for g in grids
    )
    return header + body


def export_features(
    manifest: ExportManifest, backbone: Optional[Backbone] = None
) -> List[str]:
    """Run the backbone over every readable image and write the feature
    file. Returns the ids that made it into the file, in manifest order."""
    if not manifest.features_path:
        raise ManifestError("manifest has no outputs.features path")
    if backbone is None:
        backbone = get_backbone(manifest.backbone, manifest.grid)
    grids: List[np.ndarray] = []
    exported: List[str] = []
    for entry in manifest.images:
        image = load_image(entry.path, manifest.mean, manifest.std)
        if image is None:
            continue
        grid = np.asarray(backbone(image), dtype=np.float64)
        if grid.shape != manifest.grid:
            raise ManifestError(
                f"backbone emitted {grid.shape} for image "
                f"{entry.image_id!r}, manifest declares {manifest.grid}"
            )
        if not np.isfinite(grid).all():
            raise ManifestError(
                f"backbone emitted non-finite values for image "
                f"{entry.image_id!r}"
            )
        grids.append(grid)
        exported.append(entry.image_id)
    _atomic_write(manifest.features_path, feature_bytes(grids, manifest.grid))
    return exported


def export_records(manifest: ExportManifest, source: LogitsSource) -> List[str]:
    """Pull per-slot logits for every readable image and write the
    record file (JSON lines, one object per image, no agg_logits)."""
    if not manifest.records_path:
        raise ManifestError("manifest has no outputs.records path")
    lines: List[str] = []
    exported: List[str] = []
    shape = None
    for entry in manifest.images:
        image = load_image(entry.path, manifest.mean, manifest.std)
        if image is None:
            continue
        logits = np.asarray(source(entry.image_id, image), dtype=np.float64)
        if logits.ndim != 2 or min(logits.shape) < 1:
            raise ManifestError(
                f"logits source returned shape {logits.shape} for image "
                f"{entry.image_id!r}; need slots x classes"
            )
        if shape is None:
            shape = logits.shape
        elif logits.shape != shape:
            raise ManifestError(
                f"logits source changed shape at image {entry.image_id!r}: "
                f"{logits.shape} after {shape}"
            )
        if not np.isfinite(logits).all():
            raise ManifestError(
                f"logits source returned non-finite values for image "
                f"{entry.image_id!r}"
            )
        obj = {
            "id": entry.image_id,
            "slot_logits": logits.tolist(),
            "tag": entry.tag,
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
        exported.append(entry.image_id)
    payload = ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
    _atomic_write(manifest.records_path, payload)
    return exported


def toy_logits_source(
    num_slots: int, num_classes: int, seed: int = 0
) -> LogitsSource:
    """Deterministic per-image random peaked logits, for fixtures.

    Each slot gets one class at logit 4 over a small noise floor; the
    class choices depend only on (seed, image id), not on call order.
    """
    if num_slots < 1 or num_classes < 2:
        raise ValueError("need num_slots >= 1 and num_classes >= 2")

    def run(image_id: str, image: np.ndarray) -> np.ndarray:
        digest = np.frombuffer(
            image_id.encode("utf-8").ljust(8, b"\0")[:8], dtype=np.uint64
        )[0]
        rng = np.random.default_rng((seed, int(digest)))
        logits = rng.normal(0.0, 0.3, size=(num_slots, num_classes))
        for row in range(num_slots):
            logits[row, int(rng.integers(num_classes))] += 4.0
        return logits

    return run
