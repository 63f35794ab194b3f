"""Scenario-routed person counting.

A five-way scene classifier picks the counting model per frame: box
detectors (with confidence filtering and NMS) for sparse scenes, a
density-map regressor for crowds.  The package ships deterministic
stub backends for end-to-end testing without trained weights, plus a
reader/executor for serialized real models.
"""
from .classifier import (
    ClassifierOutput,
    PreprocessConfig,
    ScenarioClassifier,
    preprocess,
    softmax,
)
from .config import AppConfig, ConfigError, build_pipeline, load_config, parse_config
from .dataset import (
    DatasetManifest,
    DatasetStats,
    ManifestError,
    SplitSpec,
    compute_statistics,
    integrate,
    load_manifest,
    save_manifest,
    split_dataset,
)
from .density import BlurConfig, count_density, gaussian_blur_5x5, sanitize
from .detection import NmsConfig, count_detections, filter_confidence, iou, nms
from .domain import (
    ALL_LABELS,
    Annotation,
    BBox,
    BodyBoxes,
    BoxArtifacts,
    CountOnly,
    DensityArtifacts,
    DensityMap,
    Detection,
    Frame,
    FrameError,
    FrameResult,
    HeadBoxes,
    HeadDots,
    NUM_SCENARIOS,
    Sample,
    ScenarioLabel,
    count_of_annotation,
    label_of_code,
    round_half_away_from_zero,
)
from .evaluation import (
    ConfusionMatrix,
    CountingMetrics,
    CrossEvalReport,
    counting_metrics,
    cross_evaluate,
    evaluate_classification,
    mae,
    rmse,
)
from .pipeline import (
    CountingPipeline,
    ModelEntry,
    RoutingTable,
    count_frame,
    majority_vote,
)
from .visualize import RenderConfig, encode_png, render_boxes, render_heatmap, render_result

__version__ = "0.1.0"

__all__ = [
    "ALL_LABELS",
    "Annotation",
    "AppConfig",
    "BBox",
    "BlurConfig",
    "BodyBoxes",
    "BoxArtifacts",
    "ClassifierOutput",
    "ConfigError",
    "ConfusionMatrix",
    "CountOnly",
    "CountingMetrics",
    "CountingPipeline",
    "CrossEvalReport",
    "DatasetManifest",
    "DatasetStats",
    "DensityArtifacts",
    "DensityMap",
    "Detection",
    "Frame",
    "FrameError",
    "FrameResult",
    "HeadBoxes",
    "HeadDots",
    "ManifestError",
    "ModelEntry",
    "NUM_SCENARIOS",
    "NmsConfig",
    "PreprocessConfig",
    "RenderConfig",
    "RoutingTable",
    "Sample",
    "ScenarioClassifier",
    "ScenarioLabel",
    "SplitSpec",
    "build_pipeline",
    "compute_statistics",
    "count_density",
    "count_detections",
    "count_frame",
    "count_of_annotation",
    "counting_metrics",
    "cross_evaluate",
    "encode_png",
    "evaluate_classification",
    "filter_confidence",
    "gaussian_blur_5x5",
    "integrate",
    "iou",
    "label_of_code",
    "load_config",
    "load_manifest",
    "mae",
    "majority_vote",
    "nms",
    "parse_config",
    "preprocess",
    "render_boxes",
    "render_heatmap",
    "render_result",
    "rmse",
    "round_half_away_from_zero",
    "sanitize",
    "save_manifest",
    "softmax",
    "split_dataset",
]
