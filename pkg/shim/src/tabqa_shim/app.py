"""HTTP surface: /v1/generate, /v1/rank, /v1/sqlgen, /healthz.

Schema violations (including malformed JSON bodies) answer 400 with an error
field; endpoints answer 503 while the backend is still loading."""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .backends import Backend
from .schemas import (
    GenerateRequest,
    GenerateResponse,
    RankRequest,
    RankResponse,
    Sample,
    SqlgenRequest,
    SqlgenResponse,
)


def create_app(backend: Backend) -> FastAPI:
    app = FastAPI(title="tabqa model shim")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    def require_ready() -> None:
        if not backend.ready:
            raise HTTPException(status_code=503, detail="model loading")

    @app.post("/v1/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        require_ready()
        texts = backend.generate(req.prompt, req.k, req.temperature, req.top_p)
        return GenerateResponse(samples=[Sample(text=t) for t in texts])

    @app.post("/v1/rank", response_model=RankResponse)
    def rank(req: RankRequest) -> RankResponse:
        require_ready()
        score = float(backend.rank(req.question, req.context_text, req.answer_a, req.answer_b))
        if not math.isfinite(score):
            raise HTTPException(status_code=500, detail="non-finite rank score")
        return RankResponse(score=score)

    @app.post("/v1/sqlgen", response_model=SqlgenResponse)
    def sqlgen(req: SqlgenRequest) -> SqlgenResponse:
        require_ready()
        return SqlgenResponse(
            queries=backend.sqlgen(req.question, req.headers, req.sample_rows)
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "status": "ok" if backend.ready else "loading",
            "models": backend.identifiers(),
        }

    return app
