"""YAML configuration: schema, defaults, and pipeline assembly.

Every section is optional and falls back to a stub-backed default, but
within a provided section unknown keys are rejected at every level, so
typos fail at load time instead of silently using defaults.

Schema (all sections optional):

    classifier:
      backend: {type: stub|onnx, ...}        per-backend options
      preprocess: {mean: [r,g,b], std: [r,g,b]}
      output_is_probabilities: false
    models:
      <model-id>:
        family: detector|density
        kind: body|head                      detectors only
        backend: {type: stub|onnx, ...}
        nms: {iou_threshold, confidence_threshold}   detectors only
    routing:                                 all five tags, if given
      side-view: <model-id>
      ...
    stream: {smoothing_window, parallelism}
    density: {sigma}
    render: {alpha, line_width, font_size, margin, stroke_width}
    service: {host, port, parallelism, queue_limit, max_request_bytes}
    evaluation:
      datasets: {<scenario-tag>: <manifest path>}

`models` and `routing` must be given together.  Relative model and
manifest paths resolve against the config file's directory.

The SCENECOUNT_CONFIG environment variable names the default config
file for the command line and the service.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import yaml

from .backends import BackendError, load_backend
from .classifier import PreprocessConfig, ScenarioClassifier
from .density import BlurConfig
from .detection import NmsConfig
from .domain import ALL_LABELS, ScenarioLabel
from .pipeline import CountingPipeline, ModelEntry, RoutingTable
from .visualize import RenderConfig

CONFIG_ENV_VAR = "SCENECOUNT_CONFIG"

DEFAULT_MODEL_IDS = {
    ScenarioLabel.SIDE_VIEW: "yolov5-i",
    ScenarioLabel.LONG_SHOT: "yolov5-ii",
    ScenarioLabel.TOP_VIEW: "yolov5-iii",
    ScenarioLabel.PROTECTIVE_SUIT: "yolov5-iv",
    ScenarioLabel.CROWD: "dm-count",
}


class ConfigError(ValueError):
    """Raised for malformed or contradictory configuration."""


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    parallelism: int = 4
    queue_limit: int = 16
    max_request_bytes: int = 16 * 1024 * 1024

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ConfigError(f"service port must be in 1..65535, got {self.port}")
        if self.parallelism < 1:
            raise ConfigError(f"service parallelism must be at least 1, got {self.parallelism}")
        if self.queue_limit < 0:
            raise ConfigError(f"service queue_limit must be non-negative, got {self.queue_limit}")
        if self.max_request_bytes < 1:
            raise ConfigError("service max_request_bytes must be positive")


@dataclass(frozen=True)
class StreamConfig:
    smoothing_window: int = 1
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError(
                f"stream smoothing_window must be a positive odd integer, "
                f"got {self.smoothing_window}"
            )
        if self.parallelism < 1:
            raise ConfigError(f"stream parallelism must be at least 1, got {self.parallelism}")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    backend: Mapping[str, Any]
    kind: str = "body"
    nms: NmsConfig = field(default_factory=NmsConfig)


@dataclass(frozen=True)
class AppConfig:
    """Validated configuration; build_pipeline turns it into live objects."""

    classifier_backend: Mapping[str, Any]
    preprocess: PreprocessConfig
    output_is_probabilities: bool
    models: Mapping[str, ModelSpec]
    routing: Mapping[ScenarioLabel, str]
    stream: StreamConfig
    blur: BlurConfig
    render: RenderConfig
    service: ServiceConfig
    eval_datasets: Mapping[ScenarioLabel, str]
    base_dir: Optional[str] = None

    def describe(self) -> dict:
        """JSON-safe summary (backend option mappings are echoed as given)."""
        return {
            "classifier": {
                "backend": dict(self.classifier_backend),
                "preprocess": {"mean": list(self.preprocess.mean),
                               "std": list(self.preprocess.std)},
                "output_is_probabilities": self.output_is_probabilities,
            },
            "models": {
                mid: {
                    "family": spec.family,
                    **({"kind": spec.kind} if spec.family == "detector" else {}),
                    "backend": dict(spec.backend),
                    **({"nms": {"iou_threshold": spec.nms.iou_threshold,
                                "confidence_threshold": spec.nms.confidence_threshold}}
                       if spec.family == "detector" else {}),
                }
                for mid, spec in self.models.items()
            },
            "routing": {label.tag: mid for label, mid in self.routing.items()},
            "stream": {"smoothing_window": self.stream.smoothing_window,
                       "parallelism": self.stream.parallelism},
            "density": {"sigma": self.blur.sigma},
            "render": {"alpha": self.render.alpha,
                       "line_width": self.render.line_width,
                       "font_size": self.render.font_size,
                       "margin": self.render.margin,
                       "stroke_width": self.render.stroke_width},
            "service": {"host": self.service.host, "port": self.service.port,
                        "parallelism": self.service.parallelism,
                        "queue_limit": self.service.queue_limit,
                        "max_request_bytes": self.service.max_request_bytes},
            "evaluation": {"datasets": {label.tag: path
                                        for label, path in self.eval_datasets.items()}},
        }


# --- strict walkers -----------------------------------------------------------

def _require_mapping(obj: Any, where: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed keys are {sorted(allowed)}")


def _get_int(obj: Mapping[str, Any], key: str, default: int, where: str) -> int:
    value = obj.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def _get_float(obj: Mapping[str, Any], key: str, default: float, where: str) -> float:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _get_triple(obj: Mapping[str, Any], key: str, default: tuple[float, float, float],
                where: str) -> tuple[float, float, float]:
    value = obj.get(key)
    if value is None:
        return default
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where}.{key}: expected 3 numbers, got {value!r}")
    try:
        return tuple(float(v) for v in value)  # type: ignore[return-value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected 3 numbers, got {value!r}") from None


def _parse_classifier(section: Mapping[str, Any]) -> tuple[dict, PreprocessConfig, bool]:
    _reject_unknown(section, {"backend", "preprocess", "output_is_probabilities"}, "classifier")
    backend = _require_mapping(section.get("backend"), "classifier.backend")
    if not backend:
        backend = {"type": "stub", "fixed_label": "side-view"}
    pp = _require_mapping(section.get("preprocess"), "classifier.preprocess")
    _reject_unknown(pp, {"mean", "std"}, "classifier.preprocess")
    cfg = PreprocessConfig(
        mean=_get_triple(pp, "mean", PreprocessConfig().mean, "classifier.preprocess"),
        std=_get_triple(pp, "std", PreprocessConfig().std, "classifier.preprocess"),
    )
    probs_flag = section.get("output_is_probabilities", False)
    if not isinstance(probs_flag, bool):
        raise ConfigError("classifier.output_is_probabilities: expected a boolean")
    return dict(backend), cfg, probs_flag


def _parse_nms(section: Mapping[str, Any], where: str) -> NmsConfig:
    _reject_unknown(section, {"iou_threshold", "confidence_threshold"}, where)
    try:
        return NmsConfig(
            iou_threshold=_get_float(section, "iou_threshold",
                                     NmsConfig().iou_threshold, where),
            confidence_threshold=_get_float(section, "confidence_threshold",
                                            NmsConfig().confidence_threshold, where),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_models(section: Mapping[str, Any]) -> dict[str, ModelSpec]:
    models: dict[str, ModelSpec] = {}
    for model_id, raw in section.items():
        where = f"models.{model_id}"
        if not isinstance(model_id, str) or not model_id:
            raise ConfigError(f"models: model ids must be non-empty strings, got {model_id!r}")
        body = _require_mapping(raw, where)
        _reject_unknown(body, {"family", "kind", "backend", "nms"}, where)
        family = body.get("family")
        if family not in ("detector", "density"):
            raise ConfigError(f"{where}.family: expected detector or density, got {family!r}")
        kind = body.get("kind", "body")
        if family == "density" and "kind" in body:
            raise ConfigError(f"{where}: kind applies to detectors only")
        if family == "density" and "nms" in body:
            raise ConfigError(f"{where}: nms applies to detectors only")
        if kind not in ("body", "head"):
            raise ConfigError(f"{where}.kind: expected body or head, got {kind!r}")
        backend = _require_mapping(body.get("backend"), f"{where}.backend")
        if not backend:
            raise ConfigError(f"{where}.backend: required")
        nms = _parse_nms(_require_mapping(body.get("nms"), f"{where}.nms"), f"{where}.nms")
        models[model_id] = ModelSpec(family=family, backend=dict(backend), kind=kind, nms=nms)
    if not models:
        raise ConfigError("models: at least one model is required")
    return models


def _parse_routing(section: Mapping[str, Any], models: Mapping[str, ModelSpec]
                   ) -> dict[ScenarioLabel, str]:
    routing: dict[ScenarioLabel, str] = {}
    for tag, model_id in section.items():
        try:
            label = ScenarioLabel.from_tag(str(tag))
        except ValueError as exc:
            raise ConfigError(f"routing: {exc}") from exc
        if model_id not in models:
            raise ConfigError(f"routing.{tag}: unknown model id {model_id!r}")
        routing[label] = model_id
    missing = [l.tag for l in ALL_LABELS if l not in routing]
    if missing:
        raise ConfigError(f"routing: missing scenarios {missing}")
    return routing


def _default_models() -> tuple[dict[str, ModelSpec], dict[ScenarioLabel, str]]:
    """Stub-backed default: one detector per box scenario, one density
    model for crowds.  synthetic_count keeps detectors total on frames
    without ground truth (live service bytes)."""
    counts = {
        ScenarioLabel.SIDE_VIEW: 4,
        ScenarioLabel.LONG_SHOT: 8,
        ScenarioLabel.TOP_VIEW: 6,
        ScenarioLabel.PROTECTIVE_SUIT: 2,
    }
    models: dict[str, ModelSpec] = {}
    routing: dict[ScenarioLabel, str] = {}
    for label, model_id in DEFAULT_MODEL_IDS.items():
        if label is ScenarioLabel.CROWD:
            models[model_id] = ModelSpec(family="density", backend={"type": "stub"})
        else:
            kind = "head" if label is ScenarioLabel.TOP_VIEW else "body"
            models[model_id] = ModelSpec(
                family="detector", kind=kind,
                backend={"type": "stub", "synthetic_count": counts[label]},
            )
        routing[label] = model_id
    return models, routing


def _parse_eval(section: Mapping[str, Any]) -> dict[ScenarioLabel, str]:
    _reject_unknown(section, {"datasets"}, "evaluation")
    datasets = _require_mapping(section.get("datasets"), "evaluation.datasets")
    out: dict[ScenarioLabel, str] = {}
    for tag, path in datasets.items():
        try:
            label = ScenarioLabel.from_tag(str(tag))
        except ValueError as exc:
            raise ConfigError(f"evaluation.datasets: {exc}") from exc
        if not isinstance(path, str) or not path:
            raise ConfigError(f"evaluation.datasets.{tag}: expected a path string")
        out[label] = path
    return out


def parse_config(doc: Any, base_dir: Optional[str] = None) -> AppConfig:
    """Validate a parsed YAML document into an AppConfig."""
    root = _require_mapping(doc, "config")
    _reject_unknown(root, {"classifier", "models", "routing", "stream", "density",
                           "render", "service", "evaluation"}, "config")

    classifier_backend, preprocess_cfg, probs_flag = _parse_classifier(
        _require_mapping(root.get("classifier"), "classifier"))

    has_models = "models" in root
    has_routing = "routing" in root
    if has_models != has_routing:
        raise ConfigError("models and routing must be provided together")
    if has_models:
        models = _parse_models(_require_mapping(root.get("models"), "models"))
        routing = _parse_routing(_require_mapping(root.get("routing"), "routing"), models)
    else:
        models, routing = _default_models()

    stream_raw = _require_mapping(root.get("stream"), "stream")
    _reject_unknown(stream_raw, {"smoothing_window", "parallelism"}, "stream")
    stream = StreamConfig(
        smoothing_window=_get_int(stream_raw, "smoothing_window", 1, "stream"),
        parallelism=_get_int(stream_raw, "parallelism", 1, "stream"),
    )

    density_raw = _require_mapping(root.get("density"), "density")
    _reject_unknown(density_raw, {"sigma"}, "density")
    try:
        blur = BlurConfig(sigma=_get_float(density_raw, "sigma", 1.0, "density"))
    except ValueError as exc:
        raise ConfigError(f"density: {exc}") from exc

    render_raw = _require_mapping(root.get("render"), "render")
    _reject_unknown(render_raw, {"alpha", "line_width", "font_size", "margin",
                                 "stroke_width"}, "render")
    defaults = RenderConfig()
    try:
        render = RenderConfig(
            alpha=_get_float(render_raw, "alpha", defaults.alpha, "render"),
            line_width=_get_int(render_raw, "line_width", defaults.line_width, "render"),
            font_size=_get_int(render_raw, "font_size", defaults.font_size, "render"),
            margin=_get_int(render_raw, "margin", defaults.margin, "render"),
            stroke_width=_get_int(render_raw, "stroke_width", defaults.stroke_width, "render"),
        )
    except ValueError as exc:
        raise ConfigError(f"render: {exc}") from exc

    service_raw = _require_mapping(root.get("service"), "service")
    _reject_unknown(service_raw, {"host", "port", "parallelism", "queue_limit",
                                  "max_request_bytes"}, "service")
    host = service_raw.get("host", ServiceConfig().host)
    if not isinstance(host, str) or not host:
        raise ConfigError("service.host: expected a non-empty string")
    service = ServiceConfig(
        host=host,
        port=_get_int(service_raw, "port", ServiceConfig().port, "service"),
        parallelism=_get_int(service_raw, "parallelism", ServiceConfig().parallelism, "service"),
        queue_limit=_get_int(service_raw, "queue_limit", ServiceConfig().queue_limit, "service"),
        max_request_bytes=_get_int(service_raw, "max_request_bytes",
                                   ServiceConfig().max_request_bytes, "service"),
    )

    eval_datasets = _parse_eval(_require_mapping(root.get("evaluation"), "evaluation"))

    return AppConfig(
        classifier_backend=classifier_backend,
        preprocess=preprocess_cfg,
        output_is_probabilities=probs_flag,
        models=models,
        routing=routing,
        stream=stream,
        blur=blur,
        render=render,
        service=service,
        eval_datasets=eval_datasets,
        base_dir=base_dir,
    )


def load_config(path: Optional[str] = None) -> AppConfig:
    """Load a YAML config file; with no path (and no environment
    override) the stub-backed default configuration is returned."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return parse_config({})
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve_path(cfg: AppConfig, path: str) -> str:
    """Resolve a config-relative path against the config file location."""
    if os.path.isabs(path) or cfg.base_dir is None:
        return path
    return os.path.join(cfg.base_dir, path)


def build_pipeline(cfg: AppConfig) -> CountingPipeline:
    """Instantiate backends and wire them into a pipeline."""
    try:
        clf_backend = load_backend(cfg.classifier_backend, "classifier",
                                   base_dir=cfg.base_dir)
    except BackendError as exc:
        raise ConfigError(str(exc)) from exc
    classifier = ScenarioClassifier(clf_backend, preprocess_cfg=cfg.preprocess,
                                    output_is_probabilities=cfg.output_is_probabilities)
    entries: dict[str, ModelEntry] = {}
    for model_id, spec in cfg.models.items():
        try:
            backend = load_backend(spec.backend, spec.family, kind=spec.kind,
                                   base_dir=cfg.base_dir)
        except BackendError as exc:
            raise ConfigError(f"models.{model_id}: {exc}") from exc
        entries[model_id] = ModelEntry(model_id=model_id, family=spec.family,
                                       backend=backend, nms=spec.nms)
    try:
        routing = RoutingTable(routes=dict(cfg.routing), models=entries)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return CountingPipeline(classifier, routing)
