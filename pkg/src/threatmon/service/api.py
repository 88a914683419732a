"""HTTP API over a running pipeline.

Read endpoints serve consistent snapshots (one lock around every handler,
single-writer semantics); write endpoints validate their bodies and are
idempotent where repeating them cannot change state. Identical duplicate
label submissions answer 409 so clients can treat a double-click as an
idempotent success.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .. import cluster, ioc
from ..corpus import format_timestamp, parse_timestamp
from .pipeline import Pipeline, VALID_LABELS


class PostBody(BaseModel):
    id: str
    author: str = ""
    timestamp: str
    text: str = ""


class LabelBody(BaseModel):
    post_id: str
    label: str


class RetrainBody(BaseModel):
    horizon_days: float | None = None


def _cluster_summary(c: cluster.Cluster, pipeline: Pipeline) -> dict:
    event = pipeline.iocs.get(c.id)
    return {
        "id": c.id,
        "exemplar_text": c.exemplar.original_text,
        "member_count": len(c.members),
        "wts": cluster.wts(c),
        "tags": sorted(event.tags) if event else [],
        "created_at": format_timestamp(c.created_at),
        "last_update": format_timestamp(c.last_update),
    }


def create_app(pipeline: Pipeline, dashboard_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="threatmon", version="0.1.0")
    lock = threading.Lock()
    # The analyst dashboard may be served from another origin during
    # development; the API carries no credentials, so a permissive CORS
    # policy is safe.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if dashboard_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(dashboard_dir), html=True), name="ui")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/health")
    def health() -> dict:
        with lock:
            return {
                "status": "ok",
                "posts": len(pipeline.posts),
                "active_clusters": len(pipeline.clusterer.state.clusters),
                "archived_clusters": len(pipeline.clusterer.state.archived),
                "model_versions": len(pipeline.model_versions),
                "bootstrap_mode": pipeline.config.bootstrap_mode,
            }

    @app.get("/clusters")
    def list_clusters() -> list[dict]:
        with lock:
            return [
                _cluster_summary(c, pipeline)
                for c in pipeline.clusterer.active_clusters()
            ]

    @app.get("/clusters/{cluster_id}")
    def get_cluster(cluster_id: int) -> dict:
        with lock:
            c = pipeline.clusterer.state.clusters.get(cluster_id)
            if c is None:
                raise HTTPException(status_code=404, detail="unknown cluster id")
            summary = _cluster_summary(c, pipeline)
            summary["members"] = [
                {
                    "post_id": p.post_id,
                    "text": p.original_text,
                    "timestamp": format_timestamp(p.timestamp),
                }
                for p in sorted(
                    c.members.values(), key=lambda p: (p.timestamp, p.post_id)
                )
            ]
            return summary

    @app.get("/iocs")
    def list_iocs() -> list[dict]:
        with lock:
            return [ioc.to_misp_json(pipeline.iocs[cid]) for cid in sorted(pipeline.iocs)]

    @app.get("/iocs/{cluster_id}")
    def get_ioc(cluster_id: int) -> dict:
        with lock:
            event = pipeline.iocs.get(cluster_id)
            if event is None:
                raise HTTPException(status_code=404, detail="unknown cluster id")
            return ioc.to_misp_json(event)

    @app.get("/metrics/daily")
    def daily_metrics() -> list[dict]:
        with lock:
            return [row.to_json() for row in pipeline.metrics_view()]

    @app.get("/reports/reduction")
    def reduction() -> dict:
        with lock:
            try:
                return pipeline.reduction_report().to_json()
            except RuntimeError as exc:
                raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/reports/durations")
    def durations() -> dict:
        with lock:
            return {str(k): v for k, v in pipeline.duration_histogram().items()}

    @app.post("/posts")
    def push_post(body: PostBody) -> dict:
        with lock:
            try:
                post = _to_post(body)
                record = pipeline.process_post(post)
            except ValueError as exc:
                if "duplicate post id" in str(exc):
                    raise HTTPException(status_code=409, detail=str(exc))
                raise HTTPException(status_code=400, detail=str(exc))
            return record.to_json()

    @app.get("/labels")
    def list_labels() -> list[dict]:
        with lock:
            return [
                pipeline.labels.current[pid].to_json()
                for pid in sorted(pipeline.labels.current)
            ]

    @app.get("/labels/{post_id}")
    def get_label(post_id: str) -> dict:
        with lock:
            record = pipeline.labels.current.get(post_id)
            if record is None:
                raise HTTPException(status_code=404, detail="no label for this post id")
            return record.to_json()

    @app.post("/labels")
    def submit_label(body: LabelBody) -> dict:
        with lock:
            if body.label not in VALID_LABELS:
                raise HTTPException(
                    status_code=400, detail=f"label must be one of {VALID_LABELS}"
                )
            try:
                record, changed = pipeline.submit_label(body.post_id, body.label)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            if not changed:
                # Idempotent duplicate: same content already stored.
                raise HTTPException(status_code=409, detail="label already recorded")
            return record.to_json()

    @app.get("/queue")
    def label_queue(source: str = "auto") -> list[dict]:
        with lock:
            try:
                return pipeline.label_queue(source)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/retrain")
    def retrain(body: RetrainBody | None = None) -> dict:
        with lock:
            horizon = body.horizon_days if body else None
            try:
                return pipeline.retrain(horizon_days=horizon)
            except (ValueError, RuntimeError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))

    return app


def _to_post(body: PostBody):
    from ..corpus import Post

    return Post(
        id=body.id,
        author=body.author,
        timestamp=parse_timestamp(body.timestamp),
        text=body.text,
    )
