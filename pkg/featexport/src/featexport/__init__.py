"""Feature and record export for the slotood interchange formats."""

__version__ = "0.1.0"

from .manifest import ExportManifest, ManifestError, load_manifest
from .export import export_features, export_records

__all__ = [
    "__version__",
    "ExportManifest",
    "ManifestError",
    "load_manifest",
    "export_features",
    "export_records",
]
