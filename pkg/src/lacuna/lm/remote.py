"""Chat-completion client for remote text-generation endpoints."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import httpx

from lacuna.lm.base import BackendError, ProtocolError, SamplingParams

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class RemoteBackendConfig:
    endpoint: str
    model: str
    auth_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 5
    max_concurrent: int = 4
    backoff_base: float = 1.0
    backoff_max: float = 30.0

    def __post_init__(self) -> None:
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "RemoteBackendConfig":
        path = Path(path)
        if path.suffix == ".toml":
            obj = tomllib.loads(path.read_text(encoding="utf-8"))
            obj = obj.get("remote", obj)
        else:
            obj = json.loads(path.read_text(encoding="utf-8"))
        if "token" in obj or "api_key" in obj:
            raise ValueError("credentials must come from the environment (set auth_env), not the config file")
        return cls(**obj)

    def digest_fields(self) -> dict[str, Any]:
        return asdict(self)


def chat_body(model: str, prompt: str, params: SamplingParams) -> dict[str, Any]:
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "max_tokens": params.max_new_tokens,
        "stop": list(params.stop_sequences),
        "seed": params.seed,
    }


def _headers(cfg: RemoteBackendConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_env:
        token = os.environ.get(cfg.auth_env)
        if not token:
            raise BackendError(f"environment variable {cfg.auth_env} is not set")
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _content(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise ProtocolError(f"malformed completion response: {resp.text[:200]!r}", resp.status_code) from None
    if not isinstance(content, str):
        raise ProtocolError("completion content is not a string", resp.status_code)
    return content


def remote_complete(
    cfg: RemoteBackendConfig,
    prompt: str,
    params: SamplingParams = SamplingParams(),
    client: httpx.Client | None = None,
    sleep=time.sleep,
) -> str:
    """POST one chat completion, retrying 429/5xx and transport errors with
    exponential backoff."""
    body = chat_body(cfg.model, prompt, params)
    headers = _headers(cfg)
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout)
    try:
        last: BackendError | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                sleep(min(cfg.backoff_max, cfg.backoff_base * 2 ** (attempt - 1)))
            try:
                resp = client.post(cfg.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = BackendError(f"transport error: {exc}")
                logger.warning("attempt %d to %s failed: %s", attempt + 1, cfg.endpoint, exc)
                continue
            if resp.status_code in RETRY_STATUSES:
                last = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
                logger.warning("attempt %d to %s got HTTP %d", attempt + 1, cfg.endpoint, resp.status_code)
                continue
            if not resp.is_success:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
            return _content(resp)
        assert last is not None
        raise last
    finally:
        if own:
            client.close()


class RemoteBackend:
    """Thread-safe free-form backend; at most ``max_concurrent`` requests in flight."""

    def __init__(self, cfg: RemoteBackendConfig, sleep=time.sleep):
        self.cfg = cfg
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=cfg.timeout, limits=httpx.Limits(max_connections=cfg.max_concurrent)
        )
        self._slots = threading.BoundedSemaphore(cfg.max_concurrent)

    @property
    def max_concurrent(self) -> int:
        return self.cfg.max_concurrent

    def generate(self, prompt: str, params: SamplingParams = SamplingParams()) -> str:
        with self._slots:
            return remote_complete(self.cfg, prompt, params, self._client, self._sleep)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
