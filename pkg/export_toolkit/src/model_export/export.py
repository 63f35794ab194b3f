"""Fixture export: model bytes, canonical input images, expected outputs.

One call writes a self-contained directory:

    model.onnx     the graph
    expected.json  manifest of expected outputs for the canonical inputs
    zeros.png, gray.png, noise.png   the canonical inputs

The expected values are computed here, with this package's own
arithmetic, so they double as an independent cross-check of the runtime
that later executes the graph.
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .fixtures import (
    CANVAS_EDGE,
    CLASSIFIER_EDGE,
    NUM_CLASSES,
    FixtureSpec,
    canonical_images,
    classifier_weights,
    density_mass,
    detector_rows,
    expected_density_count,
    expected_detector_count,
)
from .forward import classifier_logits, preprocess_tensor, softmax
from .graphs import (
    CLASSIFIER_OUTPUT,
    DENSITY_OUTPUT,
    DETECTOR_OUTPUT,
    INPUT_NAME,
    model_bytes_for,
)

MODEL_FILE = "model.onnx"
EXPECTED_FILE = "expected.json"

# the normalization consumers must configure for these fixtures, so an
# all-zero image reaches the graph as an all-zero tensor
PREPROCESS_MEAN = (0.0, 0.0, 0.0)
PREPROCESS_STD = (1.0, 1.0, 1.0)


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def _classifier_manifest(spec: FixtureSpec, images: dict[str, np.ndarray]) -> dict:
    weights = classifier_weights(spec.seed)
    cases = []
    for name, image in images.items():
        tensor = preprocess_tensor(image, PREPROCESS_MEAN, PREPROCESS_STD)
        logits = classifier_logits(tensor, weights)
        probs = softmax(logits)
        cases.append({
            "name": name,
            "file": f"{name}.png",
            "logits": [float(v) for v in logits],
            "probs": [float(p) for p in probs],
            "argmax": int(np.argmax(probs)),
        })
    return {
        "graph": {
            "input": INPUT_NAME,
            "input_shape": [1, 3, CLASSIFIER_EDGE, CLASSIFIER_EDGE],
            "output": CLASSIFIER_OUTPUT,
            "output_shape": [1, NUM_CLASSES],
        },
        "preprocess": {"mean": list(PREPROCESS_MEAN), "std": list(PREPROCESS_STD)},
        "head_bias": [float(v) for v in weights.head_b],
        "cases": cases,
    }


def _detector_manifest(spec: FixtureSpec, images: dict[str, np.ndarray]) -> dict:
    rows = detector_rows(spec)
    count = expected_detector_count(spec)
    return {
        "graph": {
            "input": INPUT_NAME,
            "input_shape": [1, 3, CANVAS_EDGE, CANVAS_EDGE],
            "output": DETECTOR_OUTPUT,
            "output_shape": list(rows.shape),
        },
        "rows": [[float(v) for v in row] for row in rows],
        "cases": [{"name": name, "file": f"{name}.png", "count": count}
                  for name in images],
    }


def _density_manifest(spec: FixtureSpec, images: dict[str, np.ndarray]) -> dict:
    mass = density_mass(spec)
    count = expected_density_count(spec)
    h, w = spec.map_shape
    return {
        "graph": {
            "input": INPUT_NAME,
            "input_shape": [1, 3, CANVAS_EDGE, CANVAS_EDGE],
            "output": DENSITY_OUTPUT,
            "output_shape": [1, 1, h, w],
        },
        "mass": mass,
        "cases": [{"name": name, "file": f"{name}.png", "mass": mass, "count": count}
                  for name in images],
    }


def export_fixtures(spec: FixtureSpec, outdir: str | Path) -> dict:
    """Write model.onnx, expected.json and the canonical inputs to outdir.

    Returns the manifest that was written.  Byte-for-byte reproducible
    for a given spec.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    images = canonical_images(spec)
    if spec.family == "classifier":
        manifest = _classifier_manifest(spec, images)
    elif spec.family == "detector":
        manifest = _detector_manifest(spec, images)
    else:
        manifest = _density_manifest(spec, images)
    manifest = {
        "family": spec.family,
        "seed": spec.seed,
        "model": MODEL_FILE,
        **manifest,
    }

    (out / MODEL_FILE).write_bytes(model_bytes_for(spec))
    (out / EXPECTED_FILE).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, image in images.items():
        (out / f"{name}.png").write_bytes(png_bytes(image))
    return manifest
