"""Shared test fixtures: synthetic datasets and stub-backed pipelines."""
from __future__ import annotations

import numpy as np
import pytest

from scenecount.backends.stubs import StubClassifier, StubDensity, StubDetector
from scenecount.classifier import ScenarioClassifier
from scenecount.dataset import DatasetManifest
from scenecount.detection import NmsConfig
from scenecount.domain import ScenarioLabel
from scenecount.pipeline import CountingPipeline, ModelEntry, RoutingTable
from scenecount.synthetic import synthetic_manifest

MODEL_IDS = {
    ScenarioLabel.SIDE_VIEW: "yolov5-i",
    ScenarioLabel.LONG_SHOT: "yolov5-ii",
    ScenarioLabel.TOP_VIEW: "yolov5-iii",
    ScenarioLabel.PROTECTIVE_SUIT: "yolov5-iv",
    ScenarioLabel.CROWD: "dm-count",
}

SPARSE_RANGE = (1, 12)
CROWD_RANGE = (40, 90)


def make_datasets(n: int = 30, seed: int = 11) -> dict[ScenarioLabel, DatasetManifest]:
    """One synthetic manifest per scenario; crowds are dense, the rest sparse."""
    out = {}
    for label in ScenarioLabel:
        rng_seed = seed * 100 + int(label)
        count_range = CROWD_RANGE if label is ScenarioLabel.CROWD else SPARSE_RANGE
        out[label] = synthetic_manifest(label, n, rng_seed, count_range)
    return out


def oracle_routing(seed: int = 0, detector_noise=None, density_noise=None,
                   detector_profiles=None, density_profiles=None) -> RoutingTable:
    """Default five-model routing over oracle stubs (optionally noisy)."""
    det_kwargs = {"seed": seed}
    if detector_noise is not None:
        det_kwargs["default"] = detector_noise
    if detector_profiles is not None:
        det_kwargs["profiles"] = detector_profiles
    den_kwargs = {"seed": seed}
    if density_noise is not None:
        den_kwargs["default"] = density_noise
    if density_profiles is not None:
        den_kwargs["profiles"] = density_profiles

    models = {}
    for label, model_id in MODEL_IDS.items():
        if label is ScenarioLabel.CROWD:
            entry = ModelEntry(model_id=model_id, family="density",
                               backend=StubDensity(**den_kwargs))
        else:
            kind = "head" if label is ScenarioLabel.TOP_VIEW else "body"
            entry = ModelEntry(model_id=model_id, family="detector",
                               backend=StubDetector(kind=kind, **det_kwargs),
                               nms=NmsConfig())
        models[model_id] = entry
    routes = {label: MODEL_IDS[label] for label in ScenarioLabel}
    return RoutingTable(routes=routes, models=models)


def perfect_pipeline(seed: int = 0) -> CountingPipeline:
    """Identity classifier + noise-free oracle backends."""
    classifier = ScenarioClassifier(StubClassifier(seed=seed))
    return CountingPipeline(classifier, oracle_routing(seed=seed))


@pytest.fixture
def datasets():
    return make_datasets()


@pytest.fixture
def pipeline():
    return perfect_pipeline()


@pytest.fixture
def rgb_image():
    rng = np.random.default_rng(20260818)
    return rng.integers(0, 255, size=(96, 128, 3), dtype=np.uint8)
