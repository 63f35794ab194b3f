"""Counting and classification metrics, plus the cross-evaluation grid.

Counting error is mean absolute error and root mean squared error over
per-image counts.  Classification quality is a K-way confusion matrix
with one-vs-rest precision/recall/F1 per class and macro (unweighted)
and weighted (support-scaled) averages.

The cross-evaluation grid runs every counting model over every
per-scenario dataset, adds a pooled "Integrated" column spanning all
samples, and an "Automatic" row where the classifier picks the model
per frame.  Samples are always visited in sorted-id order so repeated
runs are bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .dataset import DatasetManifest
from .domain import (
    ALL_LABELS,
    Frame,
    FrameError,
    NUM_SCENARIOS,
    ScenarioLabel,
    count_of_annotation,
)
from .pipeline import CountingPipeline, count_frame

AUTOMATIC_ROW = "Automatic"
INTEGRATED_COLUMN = "Integrated"


class EvaluationError(RuntimeError):
    """Raised when an evaluation run cannot produce a complete report."""


# --- counting metrics ---------------------------------------------------------

def _check_pair(truth: Sequence[float], pred: Sequence[float]) -> None:
    if len(truth) != len(pred):
        raise ValueError(
            f"truth and prediction lengths differ: {len(truth)} vs {len(pred)}"
        )
    if not truth:
        raise ValueError("cannot compute metrics over zero samples")


def mae(truth: Sequence[float], pred: Sequence[float]) -> float:
    """Mean absolute error over paired counts."""
    _check_pair(truth, pred)
    return float(np.mean(np.abs(np.asarray(truth, dtype=np.float64)
                                - np.asarray(pred, dtype=np.float64))))


def rmse(truth: Sequence[float], pred: Sequence[float]) -> float:
    """Root mean squared error over paired counts."""
    _check_pair(truth, pred)
    diff = np.asarray(truth, dtype=np.float64) - np.asarray(pred, dtype=np.float64)
    return float(math.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class CountingMetrics:
    mae: float
    rmse: float
    n: int


def counting_metrics(truth: Sequence[float], pred: Sequence[float]) -> CountingMetrics:
    return CountingMetrics(mae=mae(truth, pred), rmse=rmse(truth, pred), n=len(truth))


# --- classification metrics ---------------------------------------------------

class ConfusionMatrix:
    """K-way confusion counts, indexed [ground truth][prediction].

    Renderers that show predictions as rows transpose at display time;
    the storage convention never changes.
    """

    def __init__(self, k: int = NUM_SCENARIOS, counts: Optional[np.ndarray] = None):
        if k < 1:
            raise ValueError(f"confusion matrix needs at least 1 class, got {k}")
        if counts is None:
            self.counts = np.zeros((k, k), dtype=np.int64)
        else:
            arr = np.asarray(counts)
            if arr.shape != (k, k):
                raise ValueError(f"counts must be {k}x{k}, got {arr.shape}")
            if np.any(arr < 0) or not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("counts must be non-negative integers")
            self.counts = arr.astype(np.int64)
        self.k = k

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], k: int = NUM_SCENARIOS) -> "ConfusionMatrix":
        cm = cls(k)
        for gt, pred in pairs:
            cm.add(gt, pred)
        return cm

    def add(self, gt: int, pred: int, n: int = 1) -> None:
        if not 0 <= gt < self.k or not 0 <= pred < self.k:
            raise ValueError(f"labels must be in 0..{self.k - 1}, got gt={gt} pred={pred}")
        if n < 0:
            raise ValueError(f"cannot add a negative count {n}")
        self.counts[gt, pred] += n

    def total(self) -> int:
        return int(self.counts.sum())

    def support(self, i: int) -> int:
        return int(self.counts[i].sum())

    def one_vs_rest(self, i: int) -> tuple[int, int, int]:
        """(true positives, false positives, false negatives) for class i."""
        tp = int(self.counts[i, i])
        fp = int(self.counts[:, i].sum()) - tp
        fn = int(self.counts[i, :].sum()) - tp
        return tp, fp, fn

    def precision(self, i: int) -> float:
        tp, fp, _ = self.one_vs_rest(i)
        return tp / (tp + fp) if tp + fp else 0.0

    def recall(self, i: int) -> float:
        tp, _, fn = self.one_vs_rest(i)
        return tp / (tp + fn) if tp + fn else 0.0

    def f1(self, i: int) -> float:
        p, r = self.precision(i), self.recall(i)
        return 2.0 * p * r / (p + r) if p + r else 0.0

    def accuracy(self) -> float:
        total = self.total()
        return float(np.trace(self.counts)) / total if total else 0.0

    def macro_average(self) -> tuple[float, float, float]:
        """Unweighted mean of per-class (precision, recall, F1)."""
        ps = [self.precision(i) for i in range(self.k)]
        rs = [self.recall(i) for i in range(self.k)]
        fs = [self.f1(i) for i in range(self.k)]
        return float(np.mean(ps)), float(np.mean(rs)), float(np.mean(fs))

    def weighted_average(self) -> tuple[float, float, float]:
        """Support-weighted mean of per-class (precision, recall, F1)."""
        total = self.total()
        if not total:
            return 0.0, 0.0, 0.0
        w = [self.support(i) / total for i in range(self.k)]
        p = sum(wi * self.precision(i) for i, wi in enumerate(w))
        r = sum(wi * self.recall(i) for i, wi in enumerate(w))
        f = sum(wi * self.f1(i) for i, wi in enumerate(w))
        return float(p), float(r), float(f)

    def __repr__(self) -> str:
        return f"ConfusionMatrix(k={self.k}, total={self.total()})"


def evaluate_classification(classifier, datasets: Mapping[ScenarioLabel, DatasetManifest],
                            ) -> ConfusionMatrix:
    """Run the scenario classifier over labeled datasets.

    Frames carry no pixels here; backends that need pixels are expected
    to be wrapped upstream.  Samples run in sorted-id order per dataset.
    """
    cm = ConfusionMatrix(NUM_SCENARIOS)
    for label in ALL_LABELS:
        manifest = datasets.get(label)
        if manifest is None:
            continue
        for sample in sorted(manifest.samples, key=lambda s: s.id):
            out = classifier.classify(Frame.from_sample(sample))
            cm.add(int(label), int(out.label))
    if not cm.total():
        raise EvaluationError("no samples were classified; check the datasets mapping")
    return cm


# --- cross evaluation ----------------------------------------------------------

@dataclass(frozen=True)
class CrossEvalReport:
    """Model x dataset error grid.

    rows: counting model ids in scenario-code order, then "Automatic".
    columns: per-scenario dataset names, then "Integrated".
    cells: (row, column) -> CountingMetrics.
    """

    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: Mapping[tuple[str, str], CountingMetrics]

    def cell(self, row: str, column: str) -> CountingMetrics:
        return self.cells[(row, column)]


def _frames_sorted(manifest: DatasetManifest) -> list[Frame]:
    return [Frame.from_sample(s) for s in sorted(manifest.samples, key=lambda s: s.id)]


def cross_evaluate(pipeline: CountingPipeline,
                   datasets: Mapping[ScenarioLabel, DatasetManifest]) -> CrossEvalReport:
    """Every routed model against every dataset, plus Automatic routing.

    Fixed rows force one counting model for all frames (the classifier
    never runs); the Automatic row routes per frame through the
    classifier.  The Integrated column pools all datasets' samples.
    """
    missing = [l.tag for l in ALL_LABELS if l not in datasets]
    if missing:
        raise EvaluationError(f"cross evaluation needs all five datasets; missing {missing}")

    frames_by_label = {label: _frames_sorted(datasets[label]) for label in ALL_LABELS}
    truth_by_label = {
        label: [count_of_annotation(f.truth) for f in frames]
        for label, frames in frames_by_label.items()
    }
    for label, frames in frames_by_label.items():
        if not frames:
            raise EvaluationError(f"dataset for {label.tag!r} is empty")

    row_ids: list[str] = []
    for label in ALL_LABELS:
        model_id = pipeline.routing.routes[label]
        if model_id not in row_ids:
            row_ids.append(model_id)
    columns = tuple(label.display_name for label in ALL_LABELS) + (INTEGRATED_COLUMN,)

    cells: dict[tuple[str, str], CountingMetrics] = {}

    for model_id in row_ids:
        entry = pipeline.routing.models[model_id]
        pooled_truth: list[int] = []
        pooled_pred: list[int] = []
        for label in ALL_LABELS:
            preds = [count_frame(entry, f)[0] for f in frames_by_label[label]]
            truth = truth_by_label[label]
            cells[(model_id, label.display_name)] = counting_metrics(truth, preds)
            pooled_truth.extend(truth)
            pooled_pred.extend(preds)
        cells[(model_id, INTEGRATED_COLUMN)] = counting_metrics(pooled_truth, pooled_pred)

    pooled_truth = []
    pooled_pred = []
    for label in ALL_LABELS:
        preds = []
        for frame in frames_by_label[label]:
            result = pipeline.process_frame(frame)
            if isinstance(result, FrameError):
                raise EvaluationError(
                    f"frame {result.frame_id!r} failed at stage {result.stage}: {result.message}"
                )
            preds.append(result.count)
        truth = truth_by_label[label]
        cells[(AUTOMATIC_ROW, label.display_name)] = counting_metrics(truth, preds)
        pooled_truth.extend(truth)
        pooled_pred.extend(preds)
    cells[(AUTOMATIC_ROW, INTEGRATED_COLUMN)] = counting_metrics(pooled_truth, pooled_pred)

    return CrossEvalReport(rows=tuple(row_ids) + (AUTOMATIC_ROW,),
                           columns=columns, cells=cells)


# --- renderers ------------------------------------------------------------------

def render_classification_report(cm: ConfusionMatrix,
                                 names: Optional[Sequence[str]] = None) -> str:
    """Fixed-width per-class report with macro and weighted averages."""
    if names is None:
        names = ([l.display_name for l in ALL_LABELS] if cm.k == NUM_SCENARIOS
                 else [f"class-{i}" for i in range(cm.k)])
    if len(names) != cm.k:
        raise ValueError(f"need {cm.k} class names, got {len(names)}")
    label_width = max(12, max(len(n) for n in names), len("Weighted Avg")) + 2
    header = (f"{'Scenario':<{label_width}}{'Precision':>10}{'Recall':>8}"
              f"{'F1-score':>10}{'Support':>9}")
    lines = [header]
    for i, name in enumerate(names):
        lines.append(
            f"{name:<{label_width}}{cm.precision(i):>10.2f}{cm.recall(i):>8.2f}"
            f"{cm.f1(i):>10.2f}{cm.support(i):>9d}"
        )
    total = cm.total()
    mp, mr, mf = cm.macro_average()
    wp, wr, wf = cm.weighted_average()
    lines.append("")
    lines.append(f"{'Accuracy':<{label_width}}{'':>10}{'':>8}{cm.accuracy():>10.2f}{total:>9d}")
    lines.append(f"{'Macro Avg':<{label_width}}{mp:>10.2f}{mr:>8.2f}{mf:>10.2f}{total:>9d}")
    lines.append(f"{'Weighted Avg':<{label_width}}{wp:>10.2f}{wr:>8.2f}{wf:>10.2f}{total:>9d}")
    return "\n".join(lines)


def render_confusion_csv(cm: ConfusionMatrix,
                         names: Optional[Sequence[str]] = None) -> str:
    """CSV with predictions as rows and ground truth as columns
    (storage is [gt][pred]; this view is the transpose)."""
    if names is None:
        names = ([l.display_name for l in ALL_LABELS] if cm.k == NUM_SCENARIOS
                 else [f"class-{i}" for i in range(cm.k)])
    if len(names) != cm.k:
        raise ValueError(f"need {cm.k} class names, got {len(names)}")
    lines = ["pred\\gt," + ",".join(names)]
    for p in range(cm.k):
        row = [names[p]] + [str(int(cm.counts[g, p])) for g in range(cm.k)]
        lines.append(",".join(row))
    return "\n".join(lines)


def _grid_lines(report: CrossEvalReport, sep: str, prefix: str, suffix: str,
                with_rule: bool) -> list[str]:
    header_cells = ["Model"]
    for col in report.columns:
        header_cells.extend([f"{col} MAE", f"{col} RMSE"])
    lines = [prefix + sep.join(header_cells) + suffix]
    if with_rule:
        lines.append(prefix + sep.join(["---"] * len(header_cells)) + suffix)
    for row in report.rows:
        cells = [row]
        for col in report.columns:
            m = report.cell(row, col)
            cells.extend([f"{m.mae:.2f}", f"{m.rmse:.2f}"])
        lines.append(prefix + sep.join(cells) + suffix)
    return lines


def render_cross_eval_markdown(report: CrossEvalReport) -> str:
    return "\n".join(_grid_lines(report, " | ", "| ", " |", with_rule=True))


def render_cross_eval_csv(report: CrossEvalReport) -> str:
    return "\n".join(_grid_lines(report, ",", "", "", with_rule=False))
