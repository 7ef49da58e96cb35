"""Check exploitability of detected credentials against live or fixture endpoints.

One minimal read-only (or dry-run) request is issued per unique
credential: HTTP 200 means the credential is exploitable, 4xx means it is
not, 429 marks rate limiting. OAuth pairs are checked by attempting an
app-token grant; granted tokens are discarded immediately and never
stored, logged or replayed.

Offline is the default posture: without an explicit fixture transport no
network activity happens at all.
"""

import base64
import json
import logging
import threading
import time
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from urllib.parse import quote, urlparse

from .detect import CLIENT_ID, CLIENT_SECRET, MULTI_FACTOR_SERVICES, DetectedCredential, redact
from .errors import MutatingEndpoint, NoEndpointTemplate, TransportError


logger = logging.getLogger(__name__)

VALID = "valid"
INVALID = "invalid"
RATE_LIMITED = "rate_limited"
NETWORK_ERROR = "network_error"
SKIPPED_OFFLINE = "skipped_offline"


@dataclass(frozen=True)
class TransportRequest:
    method: str
    url: str
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""


@dataclass(frozen=True)
class TransportResponse:
    status_code: int
    body: bytes = b""


@dataclass(frozen=True)
class ValidationPolicy:
    offline: bool = True
    max_in_flight: int = 4
    per_service_rate: float = 1.0  # requests per second
    timeout: float = 10.0
    max_retries_on_network_error: int = 2


@dataclass(frozen=True)
class ValidationOutcome:
    credential: DetectedCredential
    status: str
    http_status: int | None
    checked_at: float
    endpoint_id: str

    def to_record(self) -> dict:
        return {
            "service": self.credential.service_id,
            "app": self.credential.app,
            "dataset": self.credential.dataset_tag,
            "fingerprint": self.credential.fingerprint(),
            "factors": {
                role: redact(f.value) for role, f in self.credential.factors
            },
            "status": self.status,
            "http_status": self.http_status,
            "checked_at": self.checked_at,
            "endpoint": self.endpoint_id,
        }


@dataclass(frozen=True)
class EndpointTemplate:
    service_id: str
    endpoint_id: str
    method: str
    url: str
    headers: tuple[tuple[str, str], ...] = ()
    body: str = ""
    oauth_pair: bool = False

    def build_request(self, credential: DetectedCredential) -> TransportRequest:
        values = {role: f.value for role, f in credential.factors}
        if self.oauth_pair:
            raw = f"{quote(values[CLIENT_ID])}:{quote(values[CLIENT_SECRET])}"
            values["basic_auth"] = base64.b64encode(raw.encode("ascii")).decode("ascii")
        url = self.url.format(**values)
        headers = tuple((k, v.format(**values)) for k, v in self.headers)
        return TransportRequest(
            method=self.method,
            url=url,
            headers=headers,
            body=self.body.format(**values).encode("utf-8"),
        )


@lru_cache(maxsize=4)
def _load_templates(path: str | None) -> dict[str, EndpointTemplate]:
    if path is None:
        text = resources.files("apkleak.data").joinpath("endpoints.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    raw = json.loads(text)
    templates = {}
    for service_id, entry in raw.items():
        if entry.get("mutating") is not False:
            raise MutatingEndpoint(
                f"endpoint for {service_id} must declare mutating: false"
            )
        if urlparse(entry["url"]).scheme != "https":
            raise MutatingEndpoint(f"endpoint for {service_id} must use https")
        templates[service_id] = EndpointTemplate(
            service_id=service_id,
            endpoint_id=entry["endpoint_id"],
            method=entry["method"],
            url=entry["url"],
            headers=tuple(entry.get("headers", {}).items()),
            body=entry.get("body", ""),
            oauth_pair=entry.get("oauth_pair", False),
        )
    return templates


def load_endpoint_templates(path: str | Path | None = None) -> dict[str, EndpointTemplate]:
    return dict(_load_templates(str(path) if path is not None else None))


def canonicalize_request(request: TransportRequest) -> str:
    """Stable fixture lookup key: method, url and any Authorization header."""
    auth = next((v for k, v in request.headers if k.lower() == "authorization"), None)
    key = f"{request.method} {request.url}"
    if auth is not None:
        key += f" auth={auth}"
    return key


class FixtureTransport:
    """In-memory transport mapping canonicalized requests to responses."""

    def __init__(self, responses: Mapping[str, tuple[int, bytes] | dict]):
        self._responses = {}
        for key, value in responses.items():
            if isinstance(value, dict):
                body = value.get("body", "")
                self._responses[key] = (
                    int(value["status"]),
                    body.encode("utf-8") if isinstance(body, str) else body,
                )
            else:
                status, body = value
                self._responses[key] = (int(status), bytes(body))
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureTransport":
        return cls(json.loads(Path(path).read_text("utf-8")))

    def send(self, request: TransportRequest) -> TransportResponse:
        with self._lock:
            self.calls += 1
        key = canonicalize_request(request)
        if key not in self._responses:
            raise TransportError(f"no fixture for request: {key}")
        status, body = self._responses[key]
        return TransportResponse(status_code=status, body=body)


class LiveTransport:
    """requests-backed transport; constructed only for online validation."""

    def __init__(self, timeout: float = 10.0):
        import requests

        self._session = requests.Session()
        self._timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, request: TransportRequest) -> TransportResponse:
        import requests

        if urlparse(request.url).scheme != "https":
            raise TransportError(f"live endpoints must use https: {request.url}")
        with self._lock:
            self.calls += 1
        try:
            resp = self._session.request(
                request.method,
                request.url,
                headers=dict(request.headers),
                data=request.body or None,
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return TransportResponse(status_code=resp.status_code, body=resp.content)


def _classify(status_code: int) -> str:
    if status_code == 200:
        return VALID
    if 200 < status_code < 300:
        logger.warning("treating %d as valid; only 200 is specified", status_code)
        return VALID
    if status_code == 429:
        return RATE_LIMITED
    if 400 <= status_code < 500:
        return INVALID
    logger.warning("treating %d as network_error", status_code)
    return NETWORK_ERROR


def _attempt(
    credential: DetectedCredential,
    template: EndpointTemplate,
    transport,
    policy: ValidationPolicy,
) -> ValidationOutcome:
    request = template.build_request(credential)
    last_error = None
    for _ in range(policy.max_retries_on_network_error + 1):
        try:
            response = transport.send(request)
        except TransportError as exc:
            last_error = exc
            continue
        # Response bodies (which may contain granted tokens) are dropped
        # here; outcomes carry only the status code.
        return ValidationOutcome(
            credential=credential,
            status=_classify(response.status_code),
            http_status=response.status_code,
            checked_at=time.time(),
            endpoint_id=template.endpoint_id,
        )
    logger.warning("network error validating %s: %s", template.endpoint_id, last_error)
    return ValidationOutcome(
        credential=credential,
        status=NETWORK_ERROR,
        http_status=None,
        checked_at=time.time(),
        endpoint_id=template.endpoint_id,
    )


def validate(
    credential: DetectedCredential,
    transport=None,
    policy: ValidationPolicy | None = None,
    templates: Mapping[str, EndpointTemplate] | None = None,
) -> ValidationOutcome:
    """Validate one credential with a single minimal request.

    With an offline policy and no fixture transport, no request is built
    or sent and the outcome is skipped_offline.
    """
    policy = policy or ValidationPolicy()
    templates = templates if templates is not None else load_endpoint_templates()
    if credential.service_id not in templates:
        raise NoEndpointTemplate(credential.service_id)
    template = templates[credential.service_id]
    if transport is None:
        if policy.offline:
            return ValidationOutcome(
                credential=credential,
                status=SKIPPED_OFFLINE,
                http_status=None,
                checked_at=time.time(),
                endpoint_id=template.endpoint_id,
            )
        transport = LiveTransport(timeout=policy.timeout)
    return _attempt(credential, template, transport, policy)


def validate_oauth_pair(
    credential: DetectedCredential,
    transport=None,
    policy: ValidationPolicy | None = None,
    templates: Mapping[str, EndpointTemplate] | None = None,
) -> ValidationOutcome:
    """Validate a client ID + client secret pair by attempting a token grant.

    Valid means the grant succeeded (HTTP 200). The token itself never
    leaves the transport response, which is discarded.
    """
    if credential.service_id not in MULTI_FACTOR_SERVICES:
        raise ValueError(f"{credential.service_id} is not an OAuth-pair service")
    roles = {role for role, _ in credential.factors}
    if roles != {CLIENT_ID, CLIENT_SECRET}:
        raise ValueError("OAuth validation needs exactly client_id and client_secret")
    return validate(credential, transport, policy, templates)


class _ServiceRateLimiter:
    def __init__(self, per_service_rate: float):
        self._interval = 1.0 / per_service_rate if per_service_rate > 0 else 0.0
        self._next_free: dict[str, float] = {}
        self._lock = threading.Lock()

    def acquire(self, service_id: str) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_free.get(service_id, now))
            self._next_free[service_id] = slot + self._interval
        delay = slot - time.monotonic()
        if delay > 0:
            time.sleep(delay)


def run_validation_batch(
    credentials: Iterable[DetectedCredential],
    transport=None,
    policy: ValidationPolicy | None = None,
    templates: Mapping[str, EndpointTemplate] | None = None,
) -> list[ValidationOutcome]:
    """Validate a batch, preserving input order.

    Credentials that share (service, factor values) are validated once and
    share the outcome. Per-service rate limits and the global in-flight
    cap apply across workers. Credentials without an endpoint template are
    logged and skipped; they never abort the batch.
    """
    policy = policy or ValidationPolicy()
    templates = templates if templates is not None else load_endpoint_templates()
    creds = list(credentials)

    unique: dict[tuple, DetectedCredential] = {}
    order: list[tuple | None] = []
    for cred in creds:
        if cred.service_id not in templates:
            logger.warning("no endpoint template for %s; skipping", cred.service_id)
            order.append(None)
            continue
        key = (cred.service_id, cred.values())
        unique.setdefault(key, cred)
        order.append(key)

    offline_skip = transport is None and policy.offline
    results: dict[tuple, ValidationOutcome] = {}
    if offline_skip:
        for key, cred in unique.items():
            results[key] = validate(cred, None, policy, templates)
    elif unique:
        limiter = _ServiceRateLimiter(policy.per_service_rate)
        live_transport = transport if transport is not None else LiveTransport(policy.timeout)

        def _job(item):
            key, cred = item
            limiter.acquire(cred.service_id)
            return key, _attempt(cred, templates[cred.service_id], live_transport, policy)

        with ThreadPoolExecutor(max_workers=policy.max_in_flight) as pool:
            for key, outcome in pool.map(_job, unique.items()):
                results[key] = outcome

    return [results[key] for key in order if key is not None]
