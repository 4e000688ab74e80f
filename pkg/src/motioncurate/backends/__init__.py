"""Wire protocol, client, deterministic mocks, and record/replay transports."""

from .client import BackendClient, CallPolicy, HttpTransport, TrackerClient, Transport
from .mock import EndpointScript, MockScript, MockTransport
from .protocol import (
    ENDPOINT_KINDS,
    ENDPOINT_PATHS,
    BackendRequest,
    BackendResponse,
    canonical_json,
    decode_frame,
    encode_frame,
    request_hash,
    validate_request_payload,
    validate_response_payload,
)
from .transcript import RecordingTransport, ReplayTransport, load_transcript

__all__ = [
    "BackendClient",
    "BackendRequest",
    "BackendResponse",
    "CallPolicy",
    "ENDPOINT_KINDS",
    "ENDPOINT_PATHS",
    "EndpointScript",
    "HttpTransport",
    "MockScript",
    "MockTransport",
    "RecordingTransport",
    "ReplayTransport",
    "TrackerClient",
    "Transport",
    "canonical_json",
    "decode_frame",
    "encode_frame",
    "load_transcript",
    "request_hash",
    "validate_request_payload",
    "validate_response_payload",
]
