"""Backend protocols, deterministic stubs, and model-file adapters.

`load_backend` turns a config mapping into a live backend:

    {"type": "stub", ...options}   deterministic stub
    {"type": "onnx", "path": ...}  serialized model run with numpy

Unknown keys are rejected so config typos fail fast.
"""
from __future__ import annotations

import os
from typing import Any, Mapping, Optional

import numpy as np

from ..domain import ScenarioLabel
from .base import (
    BackendError,
    ClassifierBackend,
    DensityBackend,
    DetectorBackend,
    check_logits,
)
from .onnx_backends import (
    OnnxClassifierBackend,
    OnnxDensityBackend,
    OnnxDetectorBackend,
    letterbox,
)
from .onnx_exec import run, run_model, supported_ops
from .onnx_io import OnnxModel, load_model, parse_model
from .stubs import (
    DensityNoise,
    DetectorNoise,
    ScoreDist,
    StubClassifier,
    StubDensity,
    StubDetector,
    frame_rng,
)

__all__ = [
    "BackendError",
    "ClassifierBackend",
    "DetectorBackend",
    "DensityBackend",
    "check_logits",
    "StubClassifier",
    "StubDetector",
    "StubDensity",
    "ScoreDist",
    "DetectorNoise",
    "DensityNoise",
    "frame_rng",
    "OnnxClassifierBackend",
    "OnnxDetectorBackend",
    "OnnxDensityBackend",
    "OnnxModel",
    "load_model",
    "parse_model",
    "run",
    "run_model",
    "supported_ops",
    "letterbox",
    "load_backend",
]

FAMILIES = ("classifier", "detector", "density")


def _check_keys(spec: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise BackendError(f"{where}: unknown keys {unknown}; allowed keys are {sorted(allowed)}")


def _score_dist(spec: Any, where: str) -> ScoreDist:
    if not isinstance(spec, Mapping):
        raise BackendError(f"{where}: score must be a mapping")
    _check_keys(spec, {"kind", "value", "low", "high"}, where)
    try:
        return ScoreDist(**spec)
    except (TypeError, ValueError) as exc:
        raise BackendError(f"{where}: {exc}") from exc


def _detector_noise(spec: Mapping[str, Any], where: str) -> DetectorNoise:
    _check_keys(spec, {"miss_rate", "false_positive_rate", "score"}, where)
    kwargs: dict[str, Any] = {}
    if "miss_rate" in spec:
        kwargs["miss_rate"] = float(spec["miss_rate"])
    if "false_positive_rate" in spec:
        kwargs["false_positive_rate"] = float(spec["false_positive_rate"])
    if "score" in spec:
        kwargs["score"] = _score_dist(spec["score"], f"{where}.score")
    try:
        return DetectorNoise(**kwargs)
    except ValueError as exc:
        raise BackendError(f"{where}: {exc}") from exc


def _density_noise(spec: Mapping[str, Any], where: str) -> DensityNoise:
    _check_keys(spec, {"rel_sigma", "abs_sigma", "bias"}, where)
    try:
        return DensityNoise(**{k: float(v) for k, v in spec.items()})
    except ValueError as exc:
        raise BackendError(f"{where}: {exc}") from exc


def _label_profiles(spec: Any, where: str, parse) -> dict[ScenarioLabel, Any]:
    if not isinstance(spec, Mapping):
        raise BackendError(f"{where}: profiles must map scenario tags to noise settings")
    out: dict[ScenarioLabel, Any] = {}
    for tag, sub in spec.items():
        try:
            label = ScenarioLabel.from_tag(str(tag))
        except ValueError as exc:
            raise BackendError(f"{where}: {exc}") from exc
        if not isinstance(sub, Mapping):
            raise BackendError(f"{where}.{tag}: must be a mapping")
        out[label] = parse(sub, f"{where}.{tag}")
    return out


def _resolve_path(spec: Mapping[str, Any], where: str, base_dir: Optional[str]) -> str:
    path = spec.get("path")
    if not isinstance(path, str) or not path:
        raise BackendError(f"{where}: model spec needs a 'path' string")
    if base_dir is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    if not os.path.exists(path):
        raise BackendError(f"{where}: model file not found: {path}")
    return path


def _pair(value: Any, where: str) -> tuple[int, int]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise BackendError(f"{where}: expected a [height, width] integer pair, got {value!r}")
    return int(value[0]), int(value[1])


def load_backend(spec: Mapping[str, Any], family: str, kind: str = "body",
                 base_dir: Optional[str] = None):
    """Build a backend instance from a config mapping.

    family selects the protocol ("classifier", "detector", "density");
    kind (body|head) applies to detectors only.
    """
    if family not in FAMILIES:
        raise BackendError(f"unknown backend family {family!r}; expected one of {FAMILIES}")
    if not isinstance(spec, Mapping):
        raise BackendError(f"{family} backend spec must be a mapping, got {type(spec).__name__}")
    btype = spec.get("type")
    where = f"{family} backend"

    if btype == "stub":
        if family == "classifier":
            _check_keys(spec, {"type", "seed", "fixed_label", "confusion"}, where)
            fixed = spec.get("fixed_label")
            fixed_label = ScenarioLabel.from_tag(fixed) if fixed is not None else None
            confusion = spec.get("confusion")
            matrix = np.asarray(confusion, dtype=np.float64) if confusion is not None else None
            try:
                return StubClassifier(confusion=matrix, seed=int(spec.get("seed", 0)),
                                      fixed_label=fixed_label)
            except ValueError as exc:
                raise BackendError(f"{where}: {exc}") from exc
        if family == "detector":
            _check_keys(spec, {"type", "seed", "miss_rate", "false_positive_rate",
                               "score", "profiles", "canvas", "synthetic_count"}, where)
            default = _detector_noise(
                {k: spec[k] for k in ("miss_rate", "false_positive_rate", "score") if k in spec},
                where)
            profiles = (_label_profiles(spec["profiles"], f"{where}.profiles", _detector_noise)
                        if "profiles" in spec else None)
            canvas = _pair(spec["canvas"], f"{where}.canvas") if "canvas" in spec else None
            kwargs: dict[str, Any] = {}
            if canvas is not None:
                kwargs["canvas"] = (canvas[1], canvas[0])  # stored as (width, height)
            if "synthetic_count" in spec:
                kwargs["synthetic_count"] = int(spec["synthetic_count"])
            return StubDetector(kind=kind, default=default, profiles=profiles,
                                seed=int(spec.get("seed", 0)), **kwargs)
        _check_keys(spec, {"type", "seed", "mass", "rel_sigma", "abs_sigma",
                           "bias", "profiles", "map_shape"}, where)
        default = _density_noise(
            {k: spec[k] for k in ("rel_sigma", "abs_sigma", "bias") if k in spec}, where)
        profiles = (_label_profiles(spec["profiles"], f"{where}.profiles", _density_noise)
                    if "profiles" in spec else None)
        kwargs = {}
        if "mass" in spec:
            kwargs["mass"] = float(spec["mass"])
        if "map_shape" in spec:
            kwargs["map_shape"] = _pair(spec["map_shape"], f"{where}.map_shape")
        try:
            return StubDensity(default=default, profiles=profiles,
                               seed=int(spec.get("seed", 0)), **kwargs)
        except ValueError as exc:
            raise BackendError(f"{where}: {exc}") from exc

    if btype == "onnx":
        if family == "classifier":
            _check_keys(spec, {"type", "path", "layout"}, where)
            return OnnxClassifierBackend(_resolve_path(spec, where, base_dir),
                                         layout=spec.get("layout"))
        if family == "detector":
            _check_keys(spec, {"type", "path", "layout", "input_size"}, where)
            size = (_pair(spec["input_size"], f"{where}.input_size")
                    if "input_size" in spec else None)
            return OnnxDetectorBackend(_resolve_path(spec, where, base_dir), kind=kind,
                                       layout=spec.get("layout"), input_size=size)
        _check_keys(spec, {"type", "path", "layout", "input_size", "mean", "std"}, where)
        size = (_pair(spec["input_size"], f"{where}.input_size")
                if "input_size" in spec else None)
        kwargs = {}
        if "mean" in spec:
            kwargs["mean"] = [float(v) for v in spec["mean"]]
        if "std" in spec:
            kwargs["std"] = [float(v) for v in spec["std"]]
        return OnnxDensityBackend(_resolve_path(spec, where, base_dir),
                                  layout=spec.get("layout"), input_size=size, **kwargs)

    raise BackendError(f"{where}: unknown type {btype!r}; expected 'stub' or 'onnx'")
