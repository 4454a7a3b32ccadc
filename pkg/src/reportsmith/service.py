"""HTTP service exposing scoring, structuring, and metrics for the companion UI.

The score path never touches a model backend, so live feedback keeps working
offline; structuring goes through whichever backend the request names.
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import ctqrs
from .config import AppConfig, resolve_backend
from .errors import AuthFailed, MalformedGeneration, ProviderUnavailable, TimedOut
from .gateway import (
    HashedBagEmbedding,
    build_fewshot_messages,
    parse_generation,
)
from .report_model import (
    BODY_SECTIONS,
    StructuredReport,
    parse_sections,
    render_report,
    report_to_dict,
    report_to_json,
)
from .textmetrics import compute_metric_report

# Built-in exemplars for few-shot structuring requests (the service has no
# dataset to draw shots from).
_SHOT_REPORTS = (
    StructuredReport(
        title="Search results ignore the language filter",
        steps_to_reproduce=(
            "Open the search page.",
            "Type any query into the search field.",
            "Select French in the language dropdown.",
        ),
        expected_result="Only French results appear in the list.",
        actual_result="The list still shows results in every language.",
        additional_information="Version: 2.4.1. Build: 20240301.",
    ).normalized(),
    StructuredReport(
        title="Crash when exporting an empty project",
        steps_to_reproduce=(
            "Create a new project.",
            "Click the export button without adding files.",
        ),
        expected_result="An empty archive is produced with a notice.",
        actual_result="The application crashes with an error dialog.",
        additional_information="Observed on Linux. Build: nightly-0412.",
    ).normalized(),
    StructuredReport(
        title="Dark theme resets after restart",
        steps_to_reproduce=(
            "Open the preferences panel.",
            "Select the dark theme option.",
            "Restart the application.",
        ),
        expected_result="The dark theme is still active after restart.",
        actual_result="The theme is wrong and falls back to light mode.",
        additional_information="Version: 11.2 on Windows 11.",
    ).normalized(),
)

BUILTIN_SHOTS = tuple(
    (render_report(report), report_to_json(report)) for report in _SHOT_REPORTS
)


def score_payload(text: str, scorer: Optional[ctqrs.CtqrsScorer] = None) -> dict:
    scorer = scorer or ctqrs.default_scorer()
    parsed = parse_sections(text)
    breakdown = scorer.score(parsed)
    payload = breakdown.to_dict()
    payload["percent"] = ctqrs.score_percent(breakdown)
    payload["missing_fields"] = [
        k.value for k in BODY_SECTIONS if k in parsed.missing_fields
    ]
    return payload


def score_payload_json(text: str, scorer: Optional[ctqrs.CtqrsScorer] = None) -> str:
    """Canonical score JSON; the CLI prints these exact bytes too."""
    return json.dumps(score_payload(text, scorer), indent=2)


async def _json_body(request: Request) -> dict:
    try:
        payload = await request.json()
    except Exception as exc:  # noqa: BLE001 - any body failure is a 400
        raise HTTPException(status_code=400, detail=f"malformed JSON body: {exc}")
    if not isinstance(payload, dict):
        raise HTTPException(status_code=400, detail="body must be a JSON object")
    return payload


def _require_text(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value.strip():
        raise HTTPException(status_code=400, detail=f"{key!r} must be a non-empty string")
    return value


def create_app(config: Optional[AppConfig] = None) -> FastAPI:
    config = config or AppConfig()
    app = FastAPI(title="reportsmith", docs_url=None, redoc_url=None)
    if config.service.allowed_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.service.allowed_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    scorer = ctqrs.default_scorer()
    fallback_provider = HashedBagEmbedding()

    @app.post("/api/score")
    async def api_score(request: Request) -> Response:
        payload = await _json_body(request)
        text = _require_text(payload, "text")
        return Response(
            content=score_payload_json(text, scorer), media_type="application/json"
        )

    @app.post("/api/structure")
    async def api_structure(request: Request) -> dict:
        payload = await _json_body(request)
        text = _require_text(payload, "text")
        shots = payload.get("shots", 0)
        if not isinstance(shots, int) or shots < 0 or shots > len(BUILTIN_SHOTS):
            raise HTTPException(
                status_code=400, detail=f"shots must be an int in [0, {len(BUILTIN_SHOTS)}]"
            )
        backend_name = payload.get("backend")
        if backend_name is not None and not isinstance(backend_name, str):
            raise HTTPException(status_code=400, detail="'backend' must be a string")
        try:
            backend = resolve_backend(config, backend_name)
        except KeyError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        messages = build_fewshot_messages(BUILTIN_SHOTS[:shots], text)
        try:
            raw = backend.complete(messages)
        except TimedOut as exc:
            raise HTTPException(status_code=504, detail=str(exc))
        except (ProviderUnavailable, AuthFailed) as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        try:
            report = parse_generation(raw)
        except MalformedGeneration as exc:
            return {"report": None, "rendered": None, "raw": raw, "parse_error": str(exc)}
        return {
            "report": report_to_dict(report),
            "rendered": render_report(report),
            "raw": raw,
            "parse_error": None,
        }

    @app.post("/api/metrics")
    async def api_metrics(request: Request) -> dict:
        payload = await _json_body(request)
        candidate = _require_text(payload, "candidate")
        reference = _require_text(payload, "reference")
        report = compute_metric_report(candidate, reference, fallback_provider)
        return report.to_dict()

    @app.get("/api/health")
    async def api_health() -> dict:
        return {"status": "ok", "backends": sorted(config.backends) + ["mock"]}

    return app
