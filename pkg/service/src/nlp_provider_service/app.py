"""HTTP application exposing the embedding and stance endpoints.

The JSON protocol has three routes:

* ``GET /health`` -> ``{"status": "ok", "dim": d, "models": {...}}``
* ``POST /embed`` with ``{"texts": [...]}`` -> ``{"embeddings": [[f, ...]], "dim": d}``
* ``POST /stance`` with ``{"items": [{"post", "parent", "comment"}, ...]}``
  -> ``{"stances": ["favor" | "against" | "none" | "unsure", ...]}``

Responses are pure functions of the request: the service keeps no per-client
state, so any number of replicas can sit behind one address.  Error mapping:
malformed bodies are 422 (pydantic validation), batches over the configured
limit are 413 with the limit echoed in the detail, and any endpoint whose
model is not loaded answers 503.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .encoders import ModelNotLoadedError


class EmbedRequest(BaseModel):
    texts: list[str]


class StanceRequestItem(BaseModel):
    post: str
    parent: str
    comment: str = Field(min_length=1)


class StanceRequest(BaseModel):
    items: list[StanceRequestItem]


def create_app(encoder, stance=None, max_batch: int = 256) -> FastAPI:
    """Build the application around an encoder and an optional stance model.

    ``encoder`` must expose ``dim``, ``name`` and ``encode``; ``stance`` (may
    be None) must expose ``name`` and ``classify``.  ``max_batch`` bounds the
    number of texts or items accepted in one request.
    """
    app = FastAPI(title="nlp-provider-service")

    @app.exception_handler(ModelNotLoadedError)
    async def _model_not_loaded(request: Request, exc: ModelNotLoadedError):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    def batch_guard(n: int, what: str) -> JSONResponse | None:
        if n > max_batch:
            return JSONResponse(
                status_code=413,
                content={
                    "detail": f"batch of {n} {what} exceeds max-batch {max_batch}"
                },
            )
        return None

    @app.get("/health")
    def health():
        ensure = getattr(encoder, "ensure_loaded", None)
        if ensure is not None:
            ensure()
        return {
            "status": "ok",
            "dim": encoder.dim,
            "models": {
                "embedding": encoder.name,
                "stance": stance.name if stance is not None else None,
            },
        }

    @app.post("/embed")
    def embed(req: EmbedRequest):
        oversize = batch_guard(len(req.texts), "texts")
        if oversize is not None:
            return oversize
        embeddings = encoder.encode(req.texts)
        return {"embeddings": embeddings, "dim": encoder.dim}

    @app.post("/stance")
    def stance_route(req: StanceRequest):
        oversize = batch_guard(len(req.items), "items")
        if oversize is not None:
            return oversize
        if stance is None:
            raise ModelNotLoadedError("no stance model is configured")
        labels = [
            stance.classify(item.post, item.parent, item.comment)
            for item in req.items
        ]
        return {"stances": labels}

    return app
