"""Unified command line.

Single images print one canonical JSON document (the same document the
HTTP service returns for the same bytes); directories stream JSONL with
a `source` field per line.  Dataset tooling (stats, split, evaluate,
evaluate-cls, cross-eval) works purely on manifests and never needs
pixel data when stub backends are configured.
"""
from __future__ import annotations

import dataclasses
import json
import os
import sys
from typing import Optional

import click

from .backends.base import BackendError
from .config import AppConfig, ConfigError, build_pipeline, load_config, resolve_path
from .dataset import (
    ManifestError,
    SplitSpec,
    compute_statistics,
    integrate,
    load_manifest,
    render_stats_table,
    save_manifest,
    split_dataset,
)
from .domain import (
    ALL_LABELS,
    Frame,
    FrameError,
    ScenarioLabel,
    count_of_annotation,
)
from .evaluation import (
    EvaluationError,
    counting_metrics,
    cross_evaluate,
    evaluate_classification,
    render_classification_report,
    render_confusion_csv,
    render_cross_eval_csv,
    render_cross_eval_markdown,
)
from .visualize import encode_png, render_result
from .wire import classification_to_wire, error_to_wire, result_to_wire

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp")


def _fail(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(1)


def _load_cfg(ctx: click.Context) -> AppConfig:
    try:
        return load_config(ctx.obj)
    except ConfigError as exc:
        _fail(f"config error: {exc}")
        raise  # unreachable


def _build(ctx: click.Context):
    cfg = _load_cfg(ctx)
    try:
        return cfg, build_pipeline(cfg)
    except ConfigError as exc:
        _fail(f"config error: {exc}")
        raise  # unreachable


def _load_manifest_or_fail(path: str):
    try:
        return load_manifest(path)
    except ManifestError as exc:
        _fail(str(exc))
        raise  # unreachable


def _datasets_by_label(cfg: AppConfig, data: tuple[str, ...]):
    """Resolve tag=path pairs (or the config's evaluation section) into
    one manifest per scenario."""
    sources: dict[ScenarioLabel, str] = {}
    if data:
        for item in data:
            if "=" not in item:
                _fail(f"--data expects tag=path, got {item!r}")
            tag, path = item.split("=", 1)
            try:
                sources[ScenarioLabel.from_tag(tag)] = path
            except ValueError as exc:
                _fail(str(exc))
    else:
        sources = {label: resolve_path(cfg, path)
                   for label, path in cfg.eval_datasets.items()}
    missing = [l.tag for l in ALL_LABELS if l not in sources]
    if missing:
        _fail(f"need a dataset for every scenario; missing {missing} "
              "(pass --data tag=path or set evaluation.datasets in the config)")
    return {label: _load_manifest_or_fail(path) for label, path in sources.items()}


@click.group()
@click.option("--config", "config_path", default=None,
              type=click.Path(dir_okay=False),
              help="Config file (falls back to $SCENECOUNT_CONFIG, then built-in stubs).")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str]) -> None:
    """Scenario-routed person counting."""
    ctx.obj = config_path


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def classify(ctx: click.Context, image: str) -> None:
    """Predict the scenario label for one image."""
    _, pipeline = _build(ctx)
    with open(image, "rb") as fh:
        data = fh.read()
    try:
        frame = Frame.from_bytes(data)
    except ValueError as exc:
        _fail(f"cannot decode {image}: {exc}")
    try:
        out = pipeline.classifier.classify(frame)
    except (BackendError, ValueError) as exc:
        _fail(f"classification failed: {exc}")
    click.echo(json.dumps(classification_to_wire(frame.frame_id, out)))


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--window", type=int, default=None,
              help="Odd smoothing window for directory streams (default: config).")
@click.option("--parallelism", type=int, default=None,
              help="Worker threads for directory streams (default: config).")
@click.option("--render-out", type=click.Path(dir_okay=False), default=None,
              help="Write the overlay PNG here (single image only).")
@click.pass_context
def count(ctx: click.Context, path: str, window: Optional[int],
          parallelism: Optional[int], render_out: Optional[str]) -> None:
    """Count people in one image, or stream a directory as JSONL."""
    cfg, pipeline = _build(ctx)

    if os.path.isfile(path):
        with open(path, "rb") as fh:
            data = fh.read()
        result = pipeline.process_bytes(data)
        if isinstance(result, FrameError):
            click.echo(json.dumps(error_to_wire(result)), err=True)
            sys.exit(1)
        if render_out is not None:
            frame = Frame.from_bytes(data)
            png = encode_png(render_result(frame, result, cfg.render, cfg.blur))
            with open(render_out, "wb") as fh:
                fh.write(png)
        click.echo(json.dumps(result_to_wire(result)))
        return

    if render_out is not None:
        _fail("--render-out applies to single images only")
    names = sorted(n for n in os.listdir(path)
                   if n.lower().endswith(IMAGE_SUFFIXES))
    if not names:
        _fail(f"no image files found in {path}")
    frames = []
    decode_errors = {}
    for name in names:
        with open(os.path.join(path, name), "rb") as fh:
            data = fh.read()
        try:
            frames.append((name, Frame.from_bytes(data)))
        except ValueError as exc:
            import hashlib
            decode_errors[name] = FrameError(
                hashlib.sha256(data).hexdigest(), "decode", str(exc))
    results = pipeline.process_stream(
        [f for _, f in frames],
        window=window if window is not None else cfg.stream.smoothing_window,
        parallelism=parallelism if parallelism is not None else cfg.stream.parallelism,
    )
    by_name = dict(zip((n for n, _ in frames), results))
    for name in names:
        if name in decode_errors:
            doc = error_to_wire(decode_errors[name])
        else:
            outcome = by_name[name]
            doc = (error_to_wire(outcome) if isinstance(outcome, FrameError)
                   else result_to_wire(outcome))
        doc["source"] = name
        click.echo(json.dumps(doc))


@main.command()
@click.argument("manifests", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def evaluate(ctx: click.Context, manifests: tuple[str, ...]) -> None:
    """Counting error (MAE/RMSE) of automatic routing per manifest."""
    _, pipeline = _build(ctx)
    rows = []
    pooled_truth: list[int] = []
    pooled_pred: list[int] = []
    for path in manifests:
        manifest = _load_manifest_or_fail(path)
        truth: list[int] = []
        preds: list[int] = []
        for sample in sorted(manifest.samples, key=lambda s: s.id):
            result = pipeline.process_frame(Frame.from_sample(sample))
            if isinstance(result, FrameError):
                _fail(f"{manifest.name}/{result.frame_id}: {result.stage} failed: "
                      f"{result.message}")
            truth.append(count_of_annotation(sample.annotation))
            preds.append(result.count)
        m = counting_metrics(truth, preds)
        rows.append((manifest.name, m))
        pooled_truth.extend(truth)
        pooled_pred.extend(preds)
    if len(rows) > 1:
        rows.append(("Integrated", counting_metrics(pooled_truth, pooled_pred)))
    width = max(len(name) for name, _ in rows) + 2
    click.echo(f"{'Dataset':<{width}}{'N':>7}{'MAE':>9}{'RMSE':>9}")
    for name, m in rows:
        click.echo(f"{name:<{width}}{m.n:>7}{m.mae:>9.2f}{m.rmse:>9.2f}")


@main.command(name="evaluate-cls")
@click.option("--data", multiple=True, metavar="TAG=PATH",
              help="Per-scenario manifest; repeat for all five scenarios.")
@click.option("--confusion-csv", type=click.Path(dir_okay=False), default=None,
              help="Also write the confusion matrix as CSV.")
@click.pass_context
def evaluate_cls(ctx: click.Context, data: tuple[str, ...],
                 confusion_csv: Optional[str]) -> None:
    """Classifier quality: per-class precision/recall/F1 and averages."""
    cfg, pipeline = _build(ctx)
    datasets = _datasets_by_label(cfg, data)
    try:
        cm = evaluate_classification(pipeline.classifier, datasets)
    except (EvaluationError, BackendError, ValueError) as exc:
        _fail(f"classification evaluation failed: {exc}")
    click.echo(render_classification_report(cm))
    if confusion_csv is not None:
        with open(confusion_csv, "w", encoding="utf-8") as fh:
            fh.write(render_confusion_csv(cm) + "\n")
        click.echo(f"\nconfusion matrix written to {confusion_csv}")


@main.command(name="cross-eval")
@click.option("--data", multiple=True, metavar="TAG=PATH",
              help="Per-scenario manifest; repeat for all five scenarios.")
@click.option("--out", "out_base", type=click.Path(dir_okay=False), default=None,
              help="Write <out>.md and <out>.csv next to printing the grid.")
@click.pass_context
def cross_eval(ctx: click.Context, data: tuple[str, ...],
               out_base: Optional[str]) -> None:
    """Every counting model against every scenario dataset, plus
    automatic routing and the pooled Integrated column."""
    cfg, pipeline = _build(ctx)
    datasets = _datasets_by_label(cfg, data)
    try:
        report = cross_evaluate(pipeline, datasets)
    except (EvaluationError, BackendError, ValueError) as exc:
        _fail(f"cross evaluation failed: {exc}")
    click.echo(render_cross_eval_markdown(report))
    if out_base is not None:
        with open(out_base + ".md", "w", encoding="utf-8") as fh:
            fh.write(render_cross_eval_markdown(report) + "\n")
        with open(out_base + ".csv", "w", encoding="utf-8") as fh:
            fh.write(render_cross_eval_csv(report) + "\n")
        click.echo(f"\nwrote {out_base}.md and {out_base}.csv", err=True)


@main.command()
@click.argument("manifests", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--fmt", type=click.Choice(["text", "csv"]), default="text")
@click.pass_context
def stats(ctx: click.Context, manifests: tuple[str, ...], fmt: str) -> None:
    """Scale/max/min/average-count table, one row per manifest plus an
    Integrated row when several are given."""
    loaded = [_load_manifest_or_fail(p) for p in manifests]
    rows = [(m.name, compute_statistics(m)) for m in loaded]
    if len(loaded) > 1:
        merged = integrate(loaded)
        rows.append((merged.name, compute_statistics(merged)))
    click.echo(render_stats_table(rows, fmt=fmt))


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--out-train", type=click.Path(dir_okay=False), required=True)
@click.option("--out-val", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def split(ctx: click.Context, manifest: str, seed: int, train_fraction: float,
          out_train: str, out_val: str) -> None:
    """Deterministic train/validation split of a manifest."""
    source = _load_manifest_or_fail(manifest)
    try:
        train, val = split_dataset(source, SplitSpec(seed=seed,
                                                     train_fraction=train_fraction))
    except ValueError as exc:
        _fail(str(exc))
    save_manifest(train, out_train)
    save_manifest(val, out_val)
    click.echo(json.dumps({
        "total": len(source), "train": len(train), "val": len(val),
        "seed": seed, "train_fraction": train_fraction,
    }))


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def render(ctx: click.Context, image: str, out_path: str) -> None:
    """Count one image and write the overlay PNG (boxes or heatmap,
    following the routed model) with the count stamped bottom-left."""
    cfg, pipeline = _build(ctx)
    with open(image, "rb") as fh:
        data = fh.read()
    try:
        frame = Frame.from_bytes(data)
    except ValueError as exc:
        _fail(f"cannot decode {image}: {exc}")
    result = pipeline.process_frame(frame)
    if isinstance(result, FrameError):
        _fail(f"{result.stage} failed: {result.message}")
    png = encode_png(render_result(frame, result, cfg.render, cfg.blur))
    with open(out_path, "wb") as fh:
        fh.write(png)
    click.echo(json.dumps({**result_to_wire(result), "render": out_path}))


@main.command()
@click.option("--host", default=None, help="Override service.host.")
@click.option("--port", type=int, default=None, help="Override service.port.")
@click.pass_context
def serve(ctx: click.Context, host: Optional[str], port: Optional[int]) -> None:
    """Run the HTTP service."""
    from .server import serve as run_service

    cfg = _load_cfg(ctx)
    overrides = {}
    if host is not None:
        overrides["host"] = host
    if port is not None:
        overrides["port"] = port
    if overrides:
        cfg = dataclasses.replace(cfg, service=dataclasses.replace(cfg.service, **overrides))
    run_service(cfg)


if __name__ == "__main__":
    main()
