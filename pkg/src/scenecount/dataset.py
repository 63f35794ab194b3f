"""Manifest ingestion, statistics, the deterministic 8:2 split, integration.

Manifests are UTF-8 JSON Lines, one record per line:

    {"id": "sv-0001", "image": "images/sv-0001.jpg", "scenario": "side-view",
     "annotation": {"type": "body_boxes", "data": [[x1,y1,x2,y2], ...]}}

Annotation types: body_boxes / head_boxes (list of corner boxes),
head_dots (list of [x,y]), count (bare integer).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .domain import (
    Annotation,
    BBox,
    BodyBoxes,
    CountOnly,
    HeadBoxes,
    HeadDots,
    Sample,
    ScenarioLabel,
    count_of_annotation,
    round_half_away_from_zero,
)

SPLIT_PRNG_NAME = "mt19937-fisher-yates"

_RECORD_KEYS = {"id", "image", "scenario", "annotation"}
_ANNOTATION_TYPES = {"body_boxes", "head_boxes", "head_dots", "count"}


class ManifestError(ValueError):
    """Raised for malformed manifest files; message names file and line."""


@dataclass
class DatasetManifest:
    name: str
    samples: list[Sample]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class DatasetStats:
    """Per-dataset summary: scale plus max/min/average person count."""

    scale: int
    max_persons: int
    min_persons: int
    avg_persons: float


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def _parse_annotation(obj, where: str) -> Annotation:
    if not isinstance(obj, dict) or set(obj) != {"type", "data"}:
        raise ManifestError(f"{where}: annotation must be an object with keys type/data")
    kind, data = obj["type"], obj["data"]
    if kind not in _ANNOTATION_TYPES:
        raise ManifestError(f"{where}: unknown annotation type {kind!r}")
    if kind in ("body_boxes", "head_boxes"):
        if not isinstance(data, list):
            raise ManifestError(f"{where}: box annotation data must be a list")
        try:
            boxes = tuple(BBox(*map(float, row)) for row in data)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: bad box entry: {exc}") from exc
        return BodyBoxes(boxes) if kind == "body_boxes" else HeadBoxes(boxes)
    if kind == "head_dots":
        if not isinstance(data, list):
            raise ManifestError(f"{where}: dot annotation data must be a list")
        try:
            dots = tuple((float(x), float(y)) for x, y in data)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: bad dot entry: {exc}") from exc
        return HeadDots(dots)
    if not isinstance(data, int) or isinstance(data, bool) or data < 0:
        raise ManifestError(f"{where}: count annotation data must be a non-negative integer")
    return CountOnly(data)


def parse_record(obj: dict, where: str) -> Sample:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: record must be a JSON object")
    extra = set(obj) - _RECORD_KEYS
    if extra:
        raise ManifestError(f"{where}: unknown record keys {sorted(extra)}")
    missing = _RECORD_KEYS - set(obj)
    if missing:
        raise ManifestError(f"{where}: missing record keys {sorted(missing)}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ManifestError(f"{where}: id must be a non-empty string")
    if not isinstance(obj["image"], str):
        raise ManifestError(f"{where}: image must be a path string")
    try:
        scenario = ScenarioLabel.from_tag(obj["scenario"])
    except ValueError as exc:
        raise ManifestError(f"{where}: {exc}") from exc
    annotation = _parse_annotation(obj["annotation"], where)
    return Sample(id=obj["id"], image_ref=obj["image"], scenario=scenario, annotation=annotation)


def load_manifest(path: str | Path, name: Optional[str] = None) -> DatasetManifest:
    """Parse a JSON-Lines manifest; record order is preserved."""
    path = Path(path)
    samples: list[Sample] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON: {exc.msg}") from exc
            sample = parse_record(obj, where)
            if sample.id in seen:
                raise ManifestError(f"{where}: duplicate sample id {sample.id!r}")
            seen.add(sample.id)
            samples.append(sample)
    return DatasetManifest(name=name or path.stem, samples=samples)


def _annotation_to_json(ann: Annotation) -> dict:
    if isinstance(ann, BodyBoxes):
        return {"type": "body_boxes", "data": [[b.x_min, b.y_min, b.x_max, b.y_max] for b in ann.boxes]}
    if isinstance(ann, HeadBoxes):
        return {"type": "head_boxes", "data": [[b.x_min, b.y_min, b.x_max, b.y_max] for b in ann.boxes]}
    if isinstance(ann, HeadDots):
        return {"type": "head_dots", "data": [[x, y] for x, y in ann.dots]}
    return {"type": "count", "data": ann.count}


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write JSONL records; split metadata goes to a sidecar .meta.json."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for s in manifest.samples:
            fh.write(json.dumps({
                "id": s.id,
                "image": s.image_ref,
                "scenario": s.scenario.tag,
                "annotation": _annotation_to_json(s.annotation),
            }) + "\n")
    if manifest.meta:
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps(manifest.meta, indent=2) + "\n", encoding="utf-8")


def compute_statistics(manifest: DatasetManifest) -> DatasetStats:
    """Scale plus max/min/average person count over the manifest."""
    if not manifest.samples:
        raise ValueError(f"manifest {manifest.name!r} is empty; no statistics")
    counts = [count_of_annotation(s.annotation) for s in manifest.samples]
    return DatasetStats(
        scale=len(counts),
        max_persons=max(counts),
        min_persons=min(counts),
        avg_persons=sum(counts) / len(counts),
    )


def split_dataset(manifest: DatasetManifest, spec: SplitSpec) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic train/val partition.

    Ids are sorted lexicographically, shuffled by a seeded MT19937
    Fisher-Yates pass, and the first train_fraction of the shuffle forms
    the training set.  Validation size is round(0.2*n) half-away-from-zero.
    Output manifests keep the original record order.
    """
    n = len(manifest.samples)
    if n < 2:
        raise ValueError(f"cannot split manifest {manifest.name!r} with {n} sample(s)")
    ids = sorted(s.id for s in manifest.samples)
    rng = random.Random(spec.seed)
    rng.shuffle(ids)
    n_val = round_half_away_from_zero((1.0 - spec.train_fraction) * n)
    n_train = n - n_val
    train_ids = set(ids[:n_train])
    split_meta = {
        "prng": SPLIT_PRNG_NAME,
        "seed": spec.seed,
        "train_fraction": spec.train_fraction,
        "source": manifest.name,
    }
    train = DatasetManifest(
        name=f"{manifest.name}-train",
        samples=[s for s in manifest.samples if s.id in train_ids],
        meta={"split": dict(split_meta, subset="train")},
    )
    val = DatasetManifest(
        name=f"{manifest.name}-val",
        samples=[s for s in manifest.samples if s.id not in train_ids],
        meta={"split": dict(split_meta, subset="val")},
    )
    return train, val


def integrate(manifests: Sequence[DatasetManifest], name: str = "integrated") -> DatasetManifest:
    """Concatenate manifests, preserving every sample's own scenario label.

    Ids are kept as-is while globally unique; on collision every id is
    prefixed with its manifest name.  To keep validation membership
    consistent across tasks, integrate the per-manifest splits (split
    first, integrate each subset), not the other way around.
    """
    all_ids = [s.id for m in manifests for s in m.samples]
    prefix = len(set(all_ids)) != len(all_ids)
    samples: list[Sample] = []
    seen: set[str] = set()
    for m in manifests:
        for s in m.samples:
            sid = f"{m.name}/{s.id}" if prefix else s.id
            if sid in seen:
                raise ValueError(f"duplicate sample id {sid!r} after prefixing")
            seen.add(sid)
            samples.append(Sample(id=sid, image_ref=s.image_ref, scenario=s.scenario, annotation=s.annotation))
    return DatasetManifest(name=name, samples=samples)


def render_stats_table(rows: Sequence[tuple[str, DatasetStats]], fmt: str = "text") -> str:
    """Dataset/Scale/Max./Min./Avg. table, average shown to 1 decimal."""
    if fmt == "csv":
        lines = ["Dataset,Scale,Max.,Min.,Avg."]
        for name, st in rows:
            lines.append(f"{name},{st.scale},{st.max_persons},{st.min_persons},{st.avg_persons:.1f}")
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown stats format {fmt!r}")
    header = ("Dataset", "Scale", "Max.", "Min.", "Avg.")
    cells = [header] + [
        (name, str(st.scale), str(st.max_persons), str(st.min_persons), f"{st.avg_persons:.1f}")
        for name, st in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(5)]
    out = []
    for i, row in enumerate(cells):
        out.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(row, widths))))
        if i == 0:
            out.append("-" * len(out[0]))
    return "\n".join(out) + "\n"
