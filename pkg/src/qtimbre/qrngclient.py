"""Client for an online quantum random number service.

Fetches uint8 payloads over HTTP GET (``?length=N&type=uint8``), expecting
the JSON shape ``{"type": "uint8", "length": N, "data": [...], "success":
true}``, and caches raw bytes to local files so later runs can reproduce a
simulation offline.  Other providers with the same JSON shape work by
pointing ``base_url`` elsewhere.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import (
    CacheExhausted,
    InvalidRequest,
    IoFailure,
    MalformedPayload,
    NetworkFailure,
    ServiceRefused,
)

DEFAULT_URL = "https://qrng.anu.edu.au/API/jsonI.php"

# transport: (url, timeout_seconds) -> response body text.  Injectable so
# tests can serve fixtures or prove that no network contact happens.
Transport = Callable[[str, float], str]


def _requests_transport(url: str, timeout: float) -> str:
    import requests

    resp = requests.get(url, timeout=timeout)
    resp.raise_for_status()
    return resp.text


@dataclass
class QrngEndpointConfig:
    """Where and how to talk to the QRNG service."""

    base_url: str = DEFAULT_URL
    block_size: int = 1024
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self):
        if not 1 <= self.block_size <= 1024:
            raise ValueError(f"block_size must be in [1, 1024], got {self.block_size}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


def _get_with_retries(config: QrngEndpointConfig, url: str, transport: Transport) -> str:
    delay = 0.5
    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        try:
            return transport(url, config.timeout)
        except Exception as exc:  # noqa: BLE001 - transport failures vary by backend
            last_error = exc
            if attempt < config.retries:
                time.sleep(delay)
                delay *= 2.0  # public QRNG endpoints rate-limit
    raise NetworkFailure(f"request failed after {config.retries + 1} attempts: {last_error}")


def _parse_payload(body: str, expected: int) -> bytes:
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"response is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedPayload("response JSON is not an object")
    if "success" not in payload:
        raise MalformedPayload("response missing 'success' field")
    if not payload["success"]:
        raise ServiceRefused("service reported success=false")
    data = payload.get("data")
    if not isinstance(data, list):
        raise MalformedPayload("response missing 'data' list")
    values = []
    for v in data:
        if not isinstance(v, int) or not 0 <= v <= 255:
            raise MalformedPayload(f"data value {v!r} is not a uint8")
        values.append(v)
    if len(values) < expected:
        raise MalformedPayload(
            f"service returned {len(values)} values, {expected} requested"
        )
    return bytes(values[:expected])


def fetch_random_bytes(
    config: QrngEndpointConfig, n: int, transport: Transport | None = None
) -> bytes:
    """Fetch exactly ``n`` quantum-random bytes from the service.

    Requests are issued in blocks of ``config.block_size``; a final partial
    block is trimmed so exactly ``n`` bytes come back, in request order.

    Raises :class:`InvalidRequest` for ``n < 1``, :class:`NetworkFailure`
    once retries are exhausted, :class:`MalformedPayload` for responses that
    do not match the JSON schema, and :class:`ServiceRefused` when the
    service answers with ``success: false``.
    """
    if n < 1:
        raise InvalidRequest(f"byte count must be >= 1, got {n}")
    transport = transport or _requests_transport
    chunks: list[bytes] = []
    got = 0
    while got < n:
        want = min(config.block_size, n - got)
        url = f"{config.base_url}?length={want}&type=uint8"
        body = _get_with_retries(config, url, transport)
        chunk = _parse_payload(body, want)
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def cache_bytes(data: bytes, path) -> None:
    """Write raw bytes to a cache file (no header, no framing)."""
    try:
        Path(path).write_bytes(bytes(data))
    except OSError as exc:
        raise IoFailure(f"cannot write cache {path}: {exc}") from exc


def load_cached(path, n: int) -> bytes:
    """Read the first ``n`` bytes back from a cache file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read cache {path}: {exc}") from exc
    if len(data) < n:
        raise CacheExhausted(f"cache {path} holds {len(data)} bytes, {n} requested")
    return data[:n]


def fetch_or_load(
    config: QrngEndpointConfig,
    n: int,
    cache_path,
    transport: Transport | None = None,
) -> bytes:
    """Return ``n`` bytes, preferring the local cache over the network.

    When the cache file already holds at least ``n`` bytes the network is
    never touched, so a run that specifies a populated cache is fully
    offline and reproducible.  On a miss the bytes are fetched and the
    cache file is (re)written before returning.
    """
    path = Path(cache_path)
    if path.exists():
        try:
            return load_cached(path, n)
        except CacheExhausted:
            pass
    data = fetch_random_bytes(config, n, transport=transport)
    cache_bytes(data, path)
    return data
