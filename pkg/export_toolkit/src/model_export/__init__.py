"""Deterministic ONNX fixture generator for counting-pipeline backends."""
from .export import EXPECTED_FILE, MODEL_FILE, export_fixtures, png_bytes
from .fixtures import FAMILIES, FixtureSpec

__version__ = "0.1.0"

__all__ = [
    "EXPECTED_FILE",
    "FAMILIES",
    "FixtureSpec",
    "MODEL_FILE",
    "export_fixtures",
    "png_bytes",
    "__version__",
]
