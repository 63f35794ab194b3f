"""HTTP service wrapping the counting pipeline.

Endpoints:
    POST /v1/count     image bytes -> count JSON; optional
                       ?render=boxes|heatmap adds a base64 PNG overlay
    POST /v1/classify  image bytes -> scenario JSON
    GET  /health       liveness plus backend count
    GET  /v1/config    the active configuration

Responses for identical bytes are identical in deterministic (stub)
mode, and /v1/count emits exactly the same JSON document as the
command line `count` on the same file.

Concurrency: up to `service.parallelism` requests execute at once;
up to `service.queue_limit` more wait; beyond that the service answers
429 immediately.  Admission is tracked on the event loop, so the
counters need no locks.
"""
from __future__ import annotations

import asyncio
import base64
import hashlib
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from .backends.base import BackendError
from .config import AppConfig, build_pipeline, load_config
from .domain import BoxArtifacts, DensityArtifacts, Frame, FrameError
from .visualize import encode_png, render_result
from .wire import classification_to_wire, error_to_wire, result_to_wire

RENDER_MODES = ("boxes", "heatmap")


def _error_response(status: int, payload: dict) -> JSONResponse:
    return JSONResponse(status_code=status, content=payload)


def create_app(cfg: Optional[AppConfig] = None) -> FastAPI:
    """Build the service; pipeline construction fails fast on bad config."""
    cfg = cfg if cfg is not None else load_config()
    pipeline = build_pipeline(cfg)

    app = FastAPI(title="scene-routed person counting", docs_url=None, redoc_url=None)
    app.state.cfg = cfg
    app.state.pipeline = pipeline
    app.state.inflight = 0
    app.state.workers = asyncio.Semaphore(cfg.service.parallelism)
    capacity = cfg.service.parallelism + cfg.service.queue_limit

    async def _admitted(work):
        """Run `work` in the worker pool under the admission limits."""
        if app.state.inflight >= capacity:
            return _error_response(429, {"error": "service is at capacity, retry later"})
        app.state.inflight += 1
        try:
            async with app.state.workers:
                return await run_in_threadpool(work)
        finally:
            app.state.inflight -= 1

    async def _read_body(request: Request) -> bytes | JSONResponse:
        body = await request.body()
        if len(body) > cfg.service.max_request_bytes:
            return _error_response(413, {
                "error": f"request body exceeds {cfg.service.max_request_bytes} bytes"
            })
        if not body:
            return _error_response(400, {"error": "empty request body; send image bytes"})
        return body

    @app.post("/v1/count")
    async def count(request: Request,
                    render: Optional[str] = Query(default=None)):
        if render is not None and render not in RENDER_MODES:
            return _error_response(400, {
                "error": f"render must be one of {list(RENDER_MODES)}, got {render!r}"
            })
        body = await _read_body(request)
        if isinstance(body, JSONResponse):
            return body

        def work():
            try:
                frame = Frame.from_bytes(body)
            except ValueError as exc:
                err = FrameError(hashlib.sha256(body).hexdigest(), "decode", str(exc))
                return _error_response(400, error_to_wire(err))
            result = pipeline.process_frame(frame)
            if isinstance(result, FrameError):
                return _error_response(500, error_to_wire(result))
            payload = result_to_wire(result)
            if render is not None:
                art = result.artifacts
                routed = ("boxes" if isinstance(art, BoxArtifacts)
                          else "heatmap" if isinstance(art, DensityArtifacts) else None)
                if routed != render:
                    return _error_response(400, {
                        "error": (f"render={render!r} does not match the routed model "
                                  f"output ({routed or 'none'}); model {result.model_id!r}")
                    })
                png = encode_png(render_result(frame, result, cfg.render, cfg.blur))
                payload["render"] = {
                    "mode": render,
                    "png_base64": base64.b64encode(png).decode("ascii"),
                }
            return JSONResponse(content=payload)

        return await _admitted(work)

    @app.post("/v1/classify")
    async def classify(request: Request):
        body = await _read_body(request)
        if isinstance(body, JSONResponse):
            return body

        def work():
            try:
                frame = Frame.from_bytes(body)
            except ValueError as exc:
                err = FrameError(hashlib.sha256(body).hexdigest(), "decode", str(exc))
                return _error_response(400, error_to_wire(err))
            try:
                out = pipeline.classifier.classify(frame)
            except (BackendError, ValueError) as exc:
                err = FrameError(frame.frame_id, "classify", str(exc))
                return _error_response(500, error_to_wire(err))
            return JSONResponse(content=classification_to_wire(frame.frame_id, out))

        return await _admitted(work)

    @app.get("/health")
    async def health():
        return {"status": "ok", "backends": len(pipeline.routing.models)}

    @app.get("/v1/config")
    async def config_view():
        return cfg.describe()

    return app


def serve(cfg: Optional[AppConfig] = None) -> None:
    """Run the service until interrupted; in-flight requests drain on stop."""
    import uvicorn

    cfg = cfg if cfg is not None else load_config()
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.service.host, port=cfg.service.port, log_level="info")
