"""Record real service responses for the frontend contract tests.

Runs the Python service in-process (offline stub mode), ingests the bundled
dataset, sends the two scripted queries, and writes each HTTP response body
verbatim into test/fixtures/. Re-run whenever the service's response shapes
change:

    python3 frontend/test/record_fixtures.py
"""

import io
import json
import tempfile
import zipfile
from pathlib import Path

from fastapi.testclient import TestClient

from planchat.resources import bundled_dataset_dir
from planchat.service import create_app

FIXTURES = Path(__file__).resolve().parent / "fixtures"

QUERIES = {
    "show_plan": "Show me the operations plan",
    "what_if": "How would receiving 100 kg of natural rubber on 2024-04-17 impact my plan?",
}


def dataset_zip() -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        for path in sorted(bundled_dataset_dir().iterdir()):
            archive.write(path, arcname=f"tire_plant/{path.name}")
    return buffer.getvalue()


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        with TestClient(create_app(data_dir=tmp)) as client:
            sid = client.post("/sessions").json()["session_id"]
            client.post(f"/sessions/{sid}/data", content=dataset_zip())
            recorded = {}
            for name, text in QUERIES.items():
                response = client.post(
                    f"/sessions/{sid}/messages", json={"text": text}
                )
                response.raise_for_status()
                recorded[f"message_{name}"] = response.json()
            recorded["tasks"] = client.get(f"/sessions/{sid}/tasks").json()

    for name, body in recorded.items():
        path = FIXTURES / f"{name}.json"
        path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path.relative_to(Path.cwd())}")


if __name__ == "__main__":
    main()
