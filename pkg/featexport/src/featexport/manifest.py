"""Export manifest: which images, which backbone, where the files go.

The manifest is a JSON document:

    {
      "version": 1,
      "backbone": "toy-patch",
      "grid": {"height": 4, "width": 4, "channels": 8},
      "normalization": {"mean": [0.485, 0.456, 0.406],
                        "std": [0.229, 0.224, 0.225]},
      "outputs": {"features": "out/features.ocof",
                  "records": "out/records.jsonl"},
      "images": [
        "plain/path.png",
        {"path": "img1.png", "id": "train-0001", "tag": "id"}
      ]
    }

Relative paths (images and outputs) resolve against the manifest file's
directory. String image entries default their id to the filename stem
and their tag to "unlabeled". Image ids must be unique.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Tuple

VALID_TAGS = ("id", "csid", "ood", "unlabeled")
MANIFEST_VERSION = 1


class ManifestError(ValueError):
    """The manifest is malformed or internally inconsistent."""


@dataclass(frozen=True)
class ImageEntry:
    path: str
    image_id: str
    tag: str


@dataclass(frozen=True)
class ExportManifest:
    backbone: str
    grid: Tuple[int, int, int]  # H, W, C
    mean: Tuple[float, float, float]
    std: Tuple[float, float, float]
    images: Tuple[ImageEntry, ...]
    features_path: str = ""
    records_path: str = ""


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ManifestError(f"{where}: missing required key {key!r}")
    return obj[key]


def _triple(obj, key: str, where: str) -> Tuple[float, float, float]:
    val = _require(obj, key, where)
    if not isinstance(val, list) or len(val) != 3:
        raise ManifestError(f"{where}.{key}: expected a list of 3 numbers")
    try:
        return tuple(float(v) for v in val)
    except (TypeError, ValueError) as e:
        raise ManifestError(f"{where}.{key}: {e}") from e


def parse_manifest(obj: dict, base_dir: str = ".") -> ExportManifest:
    if not isinstance(obj, dict):
        raise ManifestError(f"manifest must be an object, got {type(obj).__name__}")
    version = _require(obj, "version", "manifest")
    if version != MANIFEST_VERSION:
        raise ManifestError(
            f"unsupported manifest version {version!r}, expected {MANIFEST_VERSION}"
        )
    backbone = _require(obj, "backbone", "manifest")
    if not isinstance(backbone, str) or not backbone:
        raise ManifestError("manifest.backbone must be a non-empty string")

    grid_obj = _require(obj, "grid", "manifest")
    dims = []
    for key in ("height", "width", "channels"):
        v = _require(grid_obj, key, "grid")
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ManifestError(f"grid.{key} must be a positive integer")
        dims.append(v)

    norm = _require(obj, "normalization", "manifest")
    mean = _triple(norm, "mean", "normalization")
    std = _triple(norm, "std", "normalization")
    if any(s == 0.0 for s in std):
        raise ManifestError("normalization.std entries must be non-zero")

    outputs = obj.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ManifestError("manifest.outputs must be an object")

    def _resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    features_path = outputs.get("features", "")
    records_path = outputs.get("records", "")
    if features_path:
        features_path = _resolve(features_path)
    if records_path:
        records_path = _resolve(records_path)

    raw_images = _require(obj, "images", "manifest")
    if not isinstance(raw_images, list):
        raise ManifestError("manifest.images must be a list")
    entries = []
    seen = set()
    for i, raw in enumerate(raw_images):
        where = f"images[{i}]"
        if isinstance(raw, str):
            path, image_id, tag = raw, "", "unlabeled"
        elif isinstance(raw, dict):
            path = _require(raw, "path", where)
            image_id = raw.get("id", "")
            tag = raw.get("tag", "unlabeled")
            unknown = set(raw) - {"path", "id", "tag"}
            if unknown:
                raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
        else:
            raise ManifestError(f"{where}: expected a string or object")
        if not isinstance(path, str) or not path:
            raise ManifestError(f"{where}: path must be a non-empty string")
        if not image_id:
            image_id = os.path.splitext(os.path.basename(path))[0]
        if tag not in VALID_TAGS:
            raise ManifestError(
                f"{where}: tag must be one of {VALID_TAGS}, got {tag!r}"
            )
        if image_id in seen:
            raise ManifestError(f"{where}: duplicate image id {image_id!r}")
        seen.add(image_id)
        entries.append(ImageEntry(path=_resolve(path), image_id=image_id, tag=tag))

    return ExportManifest(
        backbone=backbone,
        grid=(dims[0], dims[1], dims[2]),
        mean=mean,
        std=std,
        images=tuple(entries),
        features_path=features_path,
        records_path=records_path,
    )


def load_manifest(path: str) -> ExportManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: invalid JSON: {e}") from e
    return parse_manifest(obj, base_dir=os.path.dirname(os.path.abspath(path)))
