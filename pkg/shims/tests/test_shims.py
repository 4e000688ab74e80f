import json

import pytest
from fastapi.testclient import TestClient

from motioncurate.backends.conformance import (
    conformance_requests,
    response_fingerprint,
    run_conformance,
)
from motioncurate.backends.mock import MockScript, MockTransport, default_stub_script
from motioncurate.backends.protocol import ENDPOINT_PATHS

from motionshims.config import SERVED_ENDPOINTS, ShimConfig
from motionshims.server import create_app


@pytest.fixture(scope="module")
def shim_fleet():
    """One stub shim per endpoint kind, as deployed: one process per kind."""
    clients = {}
    for kind in SERVED_ENDPOINTS:
        app = create_app(ShimConfig(endpoint_kind=kind))
        client = TestClient(app)
        for endpoint in SERVED_ENDPOINTS[kind]:
            clients[endpoint] = client
    return clients


def send_via(clients):
    def send(endpoint, envelope):
        response = clients[endpoint].post(ENDPOINT_PATHS[endpoint], json=envelope)
        assert response.status_code == 200, response.text
        return response.json()

    return send


class TestConformance:
    def test_every_stub_shim_passes_protocol_suite(self, shim_fleet):
        report = run_conformance(send_via(shim_fleet), expect_static_tracker=True)
        assert report.all_passed, report.failing()

    def test_mock_parity_byte_equal(self):
        clients = {}
        for kind in SERVED_ENDPOINTS:
            client = TestClient(create_app(ShimConfig(endpoint_kind=kind)))
            for endpoint in SERVED_ENDPOINTS[kind]:
                clients[endpoint] = client
        shim_lines = response_fingerprint(send_via(clients))
        mock_lines = response_fingerprint(
            MockTransport(MockScript.from_dict(default_stub_script())).send
        )
        assert shim_lines == mock_lines

    def test_request_set_covers_all_endpoints(self):
        probed = {endpoint for endpoint, _ in conformance_requests()}
        assert probed == set(ENDPOINT_PATHS)


class TestTrackerShim:
    def _client(self):
        return TestClient(create_app(ShimConfig(endpoint_kind="tracker")))

    def _post(self, client, endpoint, payload, request_id="r1"):
        response = client.post(
            ENDPOINT_PATHS[endpoint],
            json={"endpoint": endpoint, "request_id": request_id, "payload": payload},
        )
        return response

    def test_static_clip_returns_constant_boxes(self):
        client = self._client()
        box = [0.2, 0.3, 0.5, 0.8]
        assert self._post(
            client,
            "track_register",
            {"session_id": "clip", "entity_id": 10, "frame_index": 0, "box": box},
        ).status_code == 200
        for frame in range(1, 24):
            reply = self._post(
                client, "track_advance", {"session_id": "clip", "frame_index": frame}
            )
            assert reply.status_code == 200
            assert reply.json()["payload"]["boxes"] == {"10": box}

    def test_sessions_are_isolated(self):
        client = self._client()
        self._post(
            client,
            "track_register",
            {"session_id": "a", "entity_id": 10, "frame_index": 0, "box": [0, 0, 0.1, 0.1]},
        )
        reply = self._post(client, "track_advance", {"session_id": "b", "frame_index": 1})
        assert reply.json()["payload"]["boxes"] == {}

    def test_request_id_echoed(self):
        client = self._client()
        reply = self._post(
            client,
            "track_register",
            {"session_id": "a", "entity_id": 1, "frame_index": 0, "box": [0, 0, 1, 1]},
            request_id="custom-123",
        )
        assert reply.json()["request_id"] == "custom-123"


class TestServerBehavior:
    def test_unserved_endpoint_is_404(self):
        client = TestClient(create_app(ShimConfig(endpoint_kind="describe")))
        response = client.post(
            ENDPOINT_PATHS["persons"],
            json={"endpoint": "persons", "request_id": "r", "payload": {"frame": {"frame_index": 0, "path": "x"}}},
        )
        assert response.status_code == 404

    def test_schema_violation_is_400(self):
        client = TestClient(create_app(ShimConfig(endpoint_kind="ground")))
        response = client.post(
            ENDPOINT_PATHS["ground"],
            json={"endpoint": "ground", "request_id": "r", "payload": {"class_name": "cup"}},
        )
        assert response.status_code == 400
        assert "frame" in response.json()["detail"]

    def test_mismatched_envelope_endpoint_is_400(self):
        client = TestClient(create_app(ShimConfig(endpoint_kind="describe")))
        response = client.post(
            ENDPOINT_PATHS["describe"],
            json={"endpoint": "persons", "request_id": "r", "payload": {"frame": {"frame_index": 0, "path": "x"}}},
        )
        assert response.status_code == 400

    def test_bearer_token_enforced(self):
        config = ShimConfig(endpoint_kind="answer", bearer_token="secret")
        client = TestClient(create_app(config))
        envelope = {"endpoint": "answer", "request_id": "r", "payload": {"prompt": "q", "frames": []}}
        denied = client.post(ENDPOINT_PATHS["answer"], json=envelope)
        assert denied.status_code == 401
        allowed = client.post(
            ENDPOINT_PATHS["answer"], json=envelope, headers={"Authorization": "Bearer secret"}
        )
        assert allowed.status_code == 200

    def test_healthz_reports_mode(self):
        client = TestClient(create_app(ShimConfig(endpoint_kind="hands")))
        body = client.get("/healthz").json()
        assert body == {"endpoint_kind": "hands", "stub_mode": True, "model": None}

    def test_custom_stub_script(self, tmp_path):
        script = {"describe": {"rule": {"kind": "fixed_text", "text": "zebra, kite"}}}
        path = tmp_path / "script.json"
        path.write_text(json.dumps(script))
        config = ShimConfig(endpoint_kind="describe", stub_script_path=path)
        client = TestClient(create_app(config))
        reply = client.post(
            ENDPOINT_PATHS["describe"],
            json={
                "endpoint": "describe",
                "request_id": "r",
                "payload": {"frame": {"frame_index": 0, "path": "x"}},
            },
        )
        assert reply.json()["payload"] == {"text": "zebra, kite"}


class TestStartupErrors:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            ShimConfig(endpoint_kind="frobnicator")

    def test_model_mode_without_weights_fails_with_diagnostic(self):
        config = ShimConfig(endpoint_kind="tracker", model="/nonexistent/weights.pt")
        with pytest.raises(RuntimeError) as exc_info:
            create_app(config)
        assert "stub mode" in str(exc_info.value)

    def test_llm_passthrough_requires_target_format(self):
        config = ShimConfig(endpoint_kind="llm", model="not-a-target")
        with pytest.raises(RuntimeError) as exc_info:
            create_app(config)
        assert "base_url" in str(exc_info.value)
