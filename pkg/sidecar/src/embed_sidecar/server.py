"""JSON-over-HTTP surface: model listing, token-level states, pooled vectors."""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .models import LoadedModel, OverWindowError


class TokenRequest(BaseModel):
    model: str
    text: str


class EmbedRequest(BaseModel):
    model: str
    texts: list[str]
    input_type: str | None = None
    task: str | None = None


def create_app(models: dict[str, LoadedModel],
               max_concurrency: int = 2) -> FastAPI:
    app = FastAPI(title="embed-sidecar")
    gate = threading.BoundedSemaphore(max_concurrency)

    def get_model(name: str) -> LoadedModel:
        model = models.get(name)
        if model is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown model {name!r}")
        return model

    @app.get("/v1/models")
    def list_models():
        return {"models": [{"name": m.spec.name, "dims": m.dims,
                            "context_window_tokens": m.window}
                           for m in models.values()]}

    @app.post("/v1/token_embeddings")
    def token_embeddings(req: TokenRequest):
        model = get_model(req.model)
        try:
            with gate:
                tokens, offsets, matrix = model.token_states(req.text)
        except OverWindowError as exc:
            raise HTTPException(status_code=413, detail=str(exc))
        return {"model": model.spec.name, "tokens": tokens,
                "offsets": [[s, e] for s, e in offsets],
                "vectors": matrix.tolist(), "dims": model.dims}

    @app.post("/v1/embeddings")
    def embeddings(req: EmbedRequest):
        model = get_model(req.model)
        vectors: list[list[float]] = []
        errors: list[dict | None] = []
        for text in req.texts:
            try:
                with gate:
                    v = model.pooled(text, req.input_type, req.task)
                vectors.append(v.tolist())
                errors.append(None)
            except ValueError as exc:
                vectors.append([0.0] * model.dims)
                errors.append({"status": 400, "message": str(exc)})
            except OverWindowError as exc:
                vectors.append([0.0] * model.dims)
                errors.append({"status": 413, "message": str(exc)})
        return {"model": model.spec.name, "vectors": vectors,
                "dims": model.dims, "task": req.task, "errors": errors}

    return app
