"""Scenario-routed counting pipeline.

classify -> route -> count.  A routing table binds every scenario label
to exactly one counting model (box detector or density regressor); the
per-frame label picks the model.  Streams optionally smooth the label
with a majority vote over a sliding window before routing, and can fan
frames out over a thread pool while preserving input order.
"""
from __future__ import annotations

import hashlib
import threading
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from time import perf_counter
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .backends.base import BackendError
from .classifier import ScenarioClassifier
from .density import count_density, sanitize
from .detection import NmsConfig, count_detections
from .domain import (
    ALL_LABELS,
    BoxArtifacts,
    DensityArtifacts,
    Frame,
    FrameError,
    FrameResult,
    ScenarioLabel,
)

DETECTOR_FAMILY = "detector"
DENSITY_FAMILY = "density"


@dataclass(frozen=True)
class ModelEntry:
    """One counting model: id, family, live backend, NMS settings."""

    model_id: str
    family: str
    backend: object
    nms: NmsConfig = field(default_factory=NmsConfig)

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.family == DETECTOR_FAMILY:
            if not hasattr(self.backend, "detect"):
                raise ValueError(f"model {self.model_id!r}: detector backend lacks detect()")
        elif self.family == DENSITY_FAMILY:
            if not hasattr(self.backend, "density"):
                raise ValueError(f"model {self.model_id!r}: density backend lacks density()")
        else:
            raise ValueError(
                f"model {self.model_id!r}: family must be "
                f"{DETECTOR_FAMILY!r} or {DENSITY_FAMILY!r}, got {self.family!r}"
            )


@dataclass(frozen=True)
class RoutingTable:
    """Total mapping from scenario label to counting model.

    Construction fails unless every one of the five labels is routed to
    a model that exists; there is no fallback route at run time.
    """

    routes: Mapping[ScenarioLabel, str]
    models: Mapping[str, ModelEntry]

    def __post_init__(self) -> None:
        missing = [l.tag for l in ALL_LABELS if l not in self.routes]
        if missing:
            raise ValueError(f"routing table is missing scenarios: {missing}")
        extra = [k for k in self.routes if k not in ALL_LABELS]
        if extra:
            raise ValueError(f"routing table has non-scenario keys: {extra}")
        for label, model_id in self.routes.items():
            if model_id not in self.models:
                raise ValueError(
                    f"scenario {label.tag!r} routes to unknown model {model_id!r}"
                )
        for model_id, entry in self.models.items():
            if entry.model_id != model_id:
                raise ValueError(
                    f"model key {model_id!r} disagrees with entry id {entry.model_id!r}"
                )

    def entry_for(self, label: ScenarioLabel) -> ModelEntry:
        return self.models[self.routes[label]]

    def model_ids(self) -> list[str]:
        """All model ids, registration order preserved."""
        return list(self.models)


def majority_vote(labels: Sequence[ScenarioLabel]) -> ScenarioLabel:
    """Most frequent label; ties go to the most recently seen one."""
    if not labels:
        raise ValueError("cannot vote over an empty window")
    counts = Counter(labels)
    last_seen = {label: i for i, label in enumerate(labels)}
    return max(counts, key=lambda l: (counts[l], last_seen[l]))


def count_frame(entry: ModelEntry, frame: Frame):
    """Run one counting model on a frame, no routing involved.

    Returns (count, artifacts).  Callers sharing a non-thread-safe
    backend across threads must serialize access themselves.
    """
    if entry.family == DETECTOR_FAMILY:
        raw = entry.backend.detect(frame)
        count, kept = count_detections(raw, entry.nms)
        return count, BoxArtifacts(
            detections=tuple(kept), kind=getattr(entry.backend, "kind", "body")
        )
    clean, clamped = sanitize(entry.backend.density(frame))
    return count_density(clean), DensityArtifacts(density=clean, clamped_cells=clamped)


def _one_hot(label: ScenarioLabel) -> tuple[float, ...]:
    probs = [0.0] * len(ALL_LABELS)
    probs[int(label)] = 1.0
    return tuple(probs)


class CountingPipeline:
    """Binds a scenario classifier to a routing table of counting models."""

    def __init__(self, classifier: ScenarioClassifier, routing: RoutingTable):
        self.classifier = classifier
        self.routing = routing
        self._locks: dict[int, threading.Lock] = {}
        backends = [classifier.backend] + [e.backend for e in routing.models.values()]
        for backend in backends:
            if not getattr(backend, "thread_safe", False):
                self._locks.setdefault(id(backend), threading.Lock())

    def _guard(self, backend: object):
        lock = self._locks.get(id(backend))
        return lock if lock is not None else nullcontext()

    # --- stages ---------------------------------------------------------

    def _classify(self, frame: Frame):
        """Returns ((probs, label), seconds) or (FrameError, seconds)."""
        start = perf_counter()
        try:
            with self._guard(self.classifier.backend):
                out = self.classifier.classify(frame)
        except (BackendError, ValueError) as exc:
            return FrameError(frame.frame_id, "classify", str(exc)), perf_counter() - start
        return (tuple(float(p) for p in out.probs), out.label), perf_counter() - start

    def _count(self, frame: Frame, label: ScenarioLabel,
               probs: tuple[float, ...], spent: float) -> Union[FrameResult, FrameError]:
        entry = self.routing.entry_for(label)
        start = perf_counter()
        try:
            with self._guard(entry.backend):
                count, artifacts = count_frame(entry, frame)
        except (BackendError, ValueError) as exc:
            return FrameError(frame.frame_id, "count", str(exc))
        return FrameResult(
            frame_id=frame.frame_id,
            label=label,
            probs=probs,
            model_id=entry.model_id,
            count=count,
            artifacts=artifacts,
            latency_s=spent + (perf_counter() - start),
        )

    # --- entry points ---------------------------------------------------

    def process_frame(self, frame: Frame,
                      label_override: Optional[ScenarioLabel] = None
                      ) -> Union[FrameResult, FrameError]:
        """Run one frame end to end.

        label_override skips classification and forces the route; the
        probability vector becomes one-hot at the forced label.
        """
        if label_override is not None:
            return self._count(frame, label_override, _one_hot(label_override), 0.0)
        outcome, spent = self._classify(frame)
        if isinstance(outcome, FrameError):
            return outcome
        probs, label = outcome
        return self._count(frame, label, probs, spent)

    def process_bytes(self, data: bytes) -> Union[FrameResult, FrameError]:
        """Decode raw image bytes then run the frame; decode failures
        come back as stage "decode" errors keyed by the content hash."""
        try:
            frame = Frame.from_bytes(data)
        except ValueError as exc:
            return FrameError(hashlib.sha256(data).hexdigest(), "decode", str(exc))
        return self.process_frame(frame)

    def process_stream(self, frames: Iterable[Frame], window: int = 1,
                       parallelism: int = 1) -> list[Union[FrameResult, FrameError]]:
        """Run an ordered frame sequence.

        window (odd) smooths the routing label by majority vote over the
        last `window` raw per-frame predictions; window=1 reproduces
        process_frame exactly.  Frames that fail classification emit an
        error record and do not enter the voting history.  parallelism
        bounds a thread pool used for the classify and count stages;
        output order always matches input order.
        """
        if window < 1 or window % 2 == 0:
            raise ValueError(f"smoothing window must be a positive odd integer, got {window}")
        if parallelism < 1:
            raise ValueError(f"parallelism must be at least 1, got {parallelism}")
        frames = list(frames)

        if parallelism == 1:
            classified = [self._classify(f) for f in frames]
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                classified = list(pool.map(self._classify, frames))

        # smoothing is inherently sequential: the window walks raw labels
        history: deque[ScenarioLabel] = deque(maxlen=window)
        staged: list[Union[FrameError, tuple[Frame, ScenarioLabel, tuple[float, ...], float]]] = []
        for frame, (outcome, spent) in zip(frames, classified):
            if isinstance(outcome, FrameError):
                staged.append(outcome)
                continue
            probs, raw_label = outcome
            history.append(raw_label)
            label = majority_vote(tuple(history)) if window > 1 else raw_label
            staged.append((frame, label, probs, spent))

        def finish(item):
            if isinstance(item, FrameError):
                return item
            frame, label, probs, spent = item
            return self._count(frame, label, probs, spent)

        if parallelism == 1:
            return [finish(item) for item in staged]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(finish, staged))
