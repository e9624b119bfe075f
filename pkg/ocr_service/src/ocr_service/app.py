"""HTTP application implementing the transcription wire contract.

POST /transcribe takes the raw PNG bytes of one word crop as the request
body and answers {"text", "confidence"}. A body that does not decode as a
PNG is a 422 with a JSON error; a recognizer crash is a 500. GET /healthz
answers 200 "ok". Handlers keep no per-request state, so the app is safe
under concurrent requests.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from starlette.concurrency import run_in_threadpool

from . import __version__
from .config import ServiceConfig
from .errors import UndecodableUpload
from .recognizer import (
    FixtureRecognizer,
    ModelRecognizer,
    decode_image,
    load_fixture_table,
)

log = logging.getLogger(__name__)


def build_recognizer(cfg: ServiceConfig) -> FixtureRecognizer | ModelRecognizer:
    if cfg.mode == "fixture":
        return FixtureRecognizer(load_fixture_table(cfg.table))
    return ModelRecognizer(cfg.model_id)


def create_app(cfg: ServiceConfig) -> FastAPI:
    """Build the application; the recognizer is constructed once at startup."""
    recognizer = build_recognizer(cfg)
    app = FastAPI(title="ocr-service", version=__version__)

    @app.get("/healthz")
    def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.post("/transcribe")
    async def transcribe(request: Request) -> JSONResponse:
        data = await request.body()
        try:
            img = decode_image(data)
        except UndecodableUpload as e:
            return JSONResponse({"error": str(e)}, status_code=422)
        try:
            text, confidence = await run_in_threadpool(recognizer.transcribe, img)
        except Exception:
            log.exception("recognizer failed on a %d-byte upload", len(data))
            return JSONResponse({"error": "internal recognizer failure"}, status_code=500)
        return JSONResponse({"text": text, "confidence": confidence})

    return app
