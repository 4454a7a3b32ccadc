#!/usr/bin/env python3
"""Regenerate the recorded service responses used by the UI component tests.

Run from the repository root with the Python package installed:

    python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from fixture_data import FIG2_TEXT, make_gold_report  # noqa: E402
from reportsmith.config import AppConfig  # noqa: E402
from reportsmith.harness import mask_section  # noqa: E402
from reportsmith.report_model import SectionKind, render_report  # noqa: E402
from reportsmith.service import create_app  # noqa: E402

FIXTURES = REPO_ROOT / "frontend" / "fixtures"


def main() -> None:
    client = TestClient(create_app(AppConfig()))
    FIXTURES.mkdir(parents=True, exist_ok=True)

    score = client.post("/api/score", json={"text": FIG2_TEXT})
    (FIXTURES / "fig2_score.json").write_bytes(score.content)

    prose = client.post("/api/score", json={"text": "just some words"})
    (FIXTURES / "empty_score.json").write_bytes(prose.content)

    structure = client.post("/api/structure", json={"text": FIG2_TEXT, "backend": "mock"})
    (FIXTURES / "fig2_structure.json").write_bytes(structure.content)

    gold = make_gold_report(0)
    masked = mask_section(render_report(gold), gold, SectionKind.EXPECTED_RESULT)
    masked_response = client.post(
        "/api/structure", json={"text": masked, "backend": "mock"}
    )
    (FIXTURES / "masked_er_structure.json").write_bytes(masked_response.content)
    print(f"fixtures refreshed under {FIXTURES}")


if __name__ == "__main__":
    main()
