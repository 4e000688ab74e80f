"""FastAPI server speaking the model-service wire protocol for one endpoint kind."""

from __future__ import annotations

import logging
import threading
from typing import Any

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse

from motioncurate.backends.protocol import (
    ENDPOINT_PATHS,
    validate_envelope,
    validate_request_payload,
    validate_response_payload,
)
from motioncurate.errors import MockScriptExhausted, SchemaError

from .backends import build_backend
from .config import ShimConfig

logger = logging.getLogger(__name__)


class SessionLocks:
    """Per-session serialization for the tracker; other traffic stays concurrent."""

    def __init__(self) -> None:
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())


def create_app(config: ShimConfig) -> FastAPI:
    """Build the service; model load failures raise here with a diagnostic."""
    backend = build_backend(config)
    app = FastAPI(title=f"motionshim-{config.endpoint_kind}")
    session_locks = SessionLocks()

    def make_handler(endpoint: str):
        async def handler(request: Request, authorization: str | None = Header(default=None)):
            if config.bearer_token and authorization != f"Bearer {config.bearer_token}":
                raise HTTPException(status_code=401, detail="bad or missing bearer token")
            envelope = await request.json()
            try:
                validate_envelope(envelope, direction="request")
                if envelope["endpoint"] != endpoint:
                    raise SchemaError(
                        f"envelope endpoint {envelope['endpoint']!r} does not match {endpoint!r}"
                    )
                payload = envelope["payload"]
                validate_request_payload(endpoint, payload)
            except SchemaError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc

            try:
                if endpoint.startswith("track_"):
                    with session_locks.lock_for(payload["session_id"]):
                        reply = backend.handle(endpoint, payload)
                else:
                    reply = backend.handle(endpoint, payload)
            except MockScriptExhausted as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except HTTPException:
                raise
            except Exception as exc:
                logger.exception("backend failure on %s", endpoint)
                raise HTTPException(status_code=500, detail=f"{type(exc).__name__}: {exc}") from exc

            try:
                validate_response_payload(endpoint, reply)
            except SchemaError as exc:
                raise HTTPException(
                    status_code=500, detail=f"backend produced invalid payload: {exc}"
                ) from exc
            return JSONResponse(
                {"request_id": envelope["request_id"], "payload": reply}
            )

        return handler

    for endpoint in config.endpoints:
        app.post(ENDPOINT_PATHS[endpoint])(make_handler(endpoint))

    @app.get("/healthz")
    async def healthz() -> dict[str, Any]:
        return {
            "endpoint_kind": config.endpoint_kind,
            "stub_mode": config.stub_mode,
            "model": config.model,
        }

    return app


def serve(config: ShimConfig, *, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run the shim with uvicorn; blocks until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=port)
