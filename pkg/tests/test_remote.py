import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from lacuna.lm import BackendError, ProtocolError, RemoteBackend, RemoteBackendConfig, SamplingParams, remote_complete


def cfg_for(server, **kw):
    return RemoteBackendConfig(endpoint=server.url, model="toy-model", **kw)


def test_echo(chat_server):
    assert remote_complete(cfg_for(chat_server), "hello") == "WORDS: x"


def test_request_body_shape(chat_server):
    params = SamplingParams(temperature=0.2, max_new_tokens=7, stop_sequences=("\n",), seed=11)
    remote_complete(cfg_for(chat_server), "Fill in the missing", params)
    (body,) = chat_server.requests
    assert body == {
        "model": "toy-model",
        "messages": [{"role": "user", "content": "Fill in the missing"}],
        "temperature": 0.2,
        "max_tokens": 7,
        "stop": ["\n"],
        "seed": 11,
    }


def test_retries_429_with_exponential_backoff(chat_server):
    chat_server.script = [(429, {"error": "slow down"}), (429, {"error": "slow down"})]
    sleeps = []
    out = remote_complete(cfg_for(chat_server, backoff_base=0.5), "p", sleep=sleeps.append)
    assert out == "WORDS: x"
    assert len(chat_server.requests) == 3
    assert sleeps == [0.5, 1.0]


def test_gives_up_after_max_retries(chat_server):
    chat_server.script = [(503, "down")] * 10
    with pytest.raises(BackendError) as err:
        remote_complete(cfg_for(chat_server, max_retries=2), "p", sleep=lambda s: None)
    assert err.value.status == 503
    assert len(chat_server.requests) == 3


def test_client_error_not_retried(chat_server):
    chat_server.script = [(400, '{"error": "bad request"}')]
    with pytest.raises(BackendError, match="400"):
        remote_complete(cfg_for(chat_server), "p", sleep=lambda s: None)
    assert len(chat_server.requests) == 1


def test_invalid_json_is_protocol_error_without_retry(chat_server):
    chat_server.script = [(200, "{not json")]
    with pytest.raises(ProtocolError):
        remote_complete(cfg_for(chat_server), "p", sleep=lambda s: None)
    assert len(chat_server.requests) == 1


def test_missing_choices_is_protocol_error(chat_server):
    chat_server.script = [(200, {"choices": []})]
    with pytest.raises(ProtocolError):
        remote_complete(cfg_for(chat_server), "p")


def test_bearer_token_from_environment(chat_server, monkeypatch):
    monkeypatch.setenv("LACUNA_TEST_TOKEN", "s3cret")
    remote_complete(cfg_for(chat_server, auth_env="LACUNA_TEST_TOKEN"), "p")
    assert chat_server.headers[0]["Authorization"] == "Bearer s3cret"


def test_missing_token_fails_before_sending(chat_server, monkeypatch):
    monkeypatch.delenv("LACUNA_NO_SUCH_TOKEN", raising=False)
    with pytest.raises(BackendError, match="LACUNA_NO_SUCH_TOKEN"):
        remote_complete(cfg_for(chat_server, auth_env="LACUNA_NO_SUCH_TOKEN"), "p")
    assert chat_server.requests == []


def test_connection_refused_is_retried_then_raised():
    cfg = RemoteBackendConfig(endpoint="http://127.0.0.1:9/v1", model="m", max_retries=1, timeout=1)
    with pytest.raises(BackendError, match="transport"):
        remote_complete(cfg, "p", sleep=lambda s: None)


def test_config_files(tmp_path):
    (tmp_path / "r.toml").write_text('[remote]\nendpoint = "http://x"\nmodel = "m"\nmax_concurrent = 2\n')
    assert RemoteBackendConfig.from_file(tmp_path / "r.toml").max_concurrent == 2
    (tmp_path / "r.json").write_text(json.dumps({"endpoint": "http://x", "model": "m", "auth_env": "TOK"}))
    assert RemoteBackendConfig.from_file(tmp_path / "r.json").auth_env == "TOK"
    (tmp_path / "bad.json").write_text(json.dumps({"endpoint": "http://x", "model": "m", "token": "abc"}))
    with pytest.raises(ValueError, match="environment"):
        RemoteBackendConfig.from_file(tmp_path / "bad.json")


def test_backend_caps_concurrency(chat_server):
    active = 0
    peak = 0
    lock = threading.Lock()

    def slow(body):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.05)
        with lock:
            active -= 1
        return "ok"

    chat_server.reply_fn = slow
    with RemoteBackend(cfg_for(chat_server, max_concurrent=2)) as backend:
        with ThreadPoolExecutor(8) as pool:
            outs = list(pool.map(lambda i: backend.generate(f"p{i}"), range(8)))
    assert outs == ["ok"] * 8
    assert peak <= 2
