"""QRNG client against a local mock server and injected transports."""

import json

import pytest

import qtimbre.qrngclient as qrngclient
from qtimbre.errors import (
    CacheExhausted,
    InvalidRequest,
    MalformedPayload,
    NetworkFailure,
    ServiceRefused,
)
from qtimbre.qjump import AtomParams, simulate_trajectory
from qtimbre.qrngclient import (
    QrngEndpointConfig,
    cache_bytes,
    fetch_or_load,
    fetch_random_bytes,
    load_cached,
)
from qtimbre.randsource import ByteStreamSource


def _config(url: str, **kw) -> QrngEndpointConfig:
    kw.setdefault("retries", 0)
    kw.setdefault("timeout", 5.0)
    return QrngEndpointConfig(base_url=url, **kw)


class TestFetch:
    def test_returns_exact_fixture_bytes(self, mock_qrng):
        mock_qrng.responder = lambda n: json.dumps(
            {"type": "uint8", "length": 3, "data": [7, 255, 0], "success": True}
        )
        assert fetch_random_bytes(_config(mock_qrng.url), 3) == bytes([7, 255, 0])

    def test_success_false_is_refused(self, mock_qrng):
        mock_qrng.responder = lambda n: json.dumps({"success": False})
        with pytest.raises(ServiceRefused):
            fetch_random_bytes(_config(mock_qrng.url), 3)

    def test_truncated_json_is_malformed(self, mock_qrng):
        mock_qrng.responder = lambda n: '{"type": "uint8", "length": 3, "da'
        with pytest.raises(MalformedPayload):
            fetch_random_bytes(_config(mock_qrng.url), 3)

    def test_missing_data_field_is_malformed(self, mock_qrng):
        mock_qrng.responder = lambda n: json.dumps({"type": "uint8", "success": True})
        with pytest.raises(MalformedPayload):
            fetch_random_bytes(_config(mock_qrng.url), 3)

    def test_non_uint8_value_is_malformed(self, mock_qrng):
        mock_qrng.responder = lambda n: json.dumps(
            {"type": "uint8", "length": 1, "data": [300], "success": True}
        )
        with pytest.raises(MalformedPayload):
            fetch_random_bytes(_config(mock_qrng.url), 1)

    def test_zero_count_is_invalid_request(self):
        with pytest.raises(InvalidRequest):
            fetch_random_bytes(_config("http://unused.invalid"), 0)

    def test_blocks_accumulate_in_request_order(self, mock_qrng):
        assert fetch_random_bytes(_config(mock_qrng.url, block_size=4), 10) == bytes(
            (37 * i + 11) % 256 for i in range(4)
        ) * 2 + bytes((37 * i + 11) % 256 for i in range(2))
        assert mock_qrng.requests == [4, 4, 2]

    def test_overlong_payload_is_trimmed(self, mock_qrng):
        mock_qrng.responder = lambda n: json.dumps(
            {"type": "uint8", "length": 8, "data": list(range(8)), "success": True}
        )
        assert fetch_random_bytes(_config(mock_qrng.url, block_size=8), 5) == bytes(range(5))


class TestRetries:
    def test_succeeds_after_transient_failures(self, monkeypatch):
        monkeypatch.setattr(qrngclient.time, "sleep", lambda s: None)
        attempts = []

        def flaky(url, timeout):
            attempts.append(url)
            if len(attempts) < 3:
                raise ConnectionError("transient")
            return json.dumps({"type": "uint8", "length": 2, "data": [1, 2], "success": True})

        config = QrngEndpointConfig(base_url="http://x.invalid", retries=2)
        assert fetch_random_bytes(config, 2, transport=flaky) == bytes([1, 2])
        assert len(attempts) == 3

    def test_network_failure_after_retries_exhausted(self, monkeypatch):
        monkeypatch.setattr(qrngclient.time, "sleep", lambda s: None)
        attempts = []

        def dead(url, timeout):
            attempts.append(url)
            raise ConnectionError("down")

        config = QrngEndpointConfig(base_url="http://x.invalid", retries=2)
        with pytest.raises(NetworkFailure):
            fetch_random_bytes(config, 2, transport=dead)
        assert len(attempts) == 3


class TestCache:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "cache.bin"
        cache_bytes(bytes([1, 2, 3]), path)
        assert load_cached(path, 3) == bytes([1, 2, 3])

    def test_load_more_than_cached_exhausts(self, tmp_path):
        path = tmp_path / "cache.bin"
        cache_bytes(bytes([1, 2, 3]), path)
        with pytest.raises(CacheExhausted):
            load_cached(path, 4)

    def test_empty_cache_load_zero(self, tmp_path):
        path = tmp_path / "cache.bin"
        cache_bytes(b"", path)
        assert load_cached(path, 0) == b""

    def test_offline_run_never_touches_network(self, tmp_path):
        path = tmp_path / "cache.bin"
        cache_bytes(bytes(range(64)), path)

        def poisoned(url, timeout):
            raise AssertionError("network contact during an offline run")

        config = QrngEndpointConfig(base_url="http://x.invalid")
        got = fetch_or_load(config, 64, path, transport=poisoned)
        assert got == bytes(range(64))

    def test_miss_fetches_and_caches(self, tmp_path, mock_qrng):
        path = tmp_path / "cache.bin"
        first = fetch_or_load(_config(mock_qrng.url), 16, path)
        assert path.read_bytes() == first
        # second call is served from disk
        mock_qrng.responder = lambda n: (_ for _ in ()).throw(AssertionError("contacted"))
        assert fetch_or_load(_config(mock_qrng.url), 16, path) == first


def test_cached_bytes_reproduce_simulations(tmp_path, mock_qrng):
    """Fetched-then-cached bytes drive identical trajectories across runs."""
    path = tmp_path / "cache.bin"
    data = fetch_or_load(_config(mock_qrng.url), 4096, path)
    params = AtomParams()
    rec1 = simulate_trajectory(params, ByteStreamSource(data), n_events=20)
    rec2 = simulate_trajectory(
        params, ByteStreamSource(load_cached(path, 4096)), n_events=20
    )
    assert rec1.emission_times == rec2.emission_times
