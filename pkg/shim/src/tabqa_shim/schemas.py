"""Wire formats for the three service endpoints, plus the published JSON
response schemas that contract tests validate against."""

from __future__ import annotations

from pydantic import BaseModel, Field


class GenerateRequest(BaseModel):
    prompt: str
    k: int = Field(ge=1)
    temperature: float = Field(ge=0.0)
    top_p: float = Field(gt=0.0, le=1.0)


class Sample(BaseModel):
    text: str


class GenerateResponse(BaseModel):
    samples: list[Sample]


class RankRequest(BaseModel):
    question: str
    context_text: str
    answer_a: str
    answer_b: str


class RankResponse(BaseModel):
    score: float


class SqlgenRequest(BaseModel):
    question: str
    headers: list[str]
    sample_rows: list[list[str]]


class SqlgenResponse(BaseModel):
    queries: list[str]


RESPONSE_SCHEMAS = {
    "/v1/generate": {
        "type": "object",
        "required": ["samples"],
        "additionalProperties": False,
        "properties": {
            "samples": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["text"],
                    "additionalProperties": False,
                    "properties": {"text": {"type": "string"}},
                },
            }
        },
    },
    "/v1/rank": {
        "type": "object",
        "required": ["score"],
        "additionalProperties": False,
        "properties": {"score": {"type": "number"}},
    },
    "/v1/sqlgen": {
        "type": "object",
        "required": ["queries"],
        "additionalProperties": False,
        "properties": {
            "queries": {"type": "array", "items": {"type": "string"}}
        },
    },
}
