"""Backends that answer protocol requests: deterministic mock plus clients.

Three interchangeable providers expose ``logprobs`` / ``hidden_states`` /
``nsp`` methods:

* :class:`MockBackend` computes everything in-process and is fully
  deterministic: uniform per-token log-probabilities ``log(1/V)``, hidden
  vectors seeded by a hash of ``(word, position)``, and an uninformative
  next-sentence probability of 0.5.
* :class:`StdioClient` speaks newline-delimited JSON to a child process.
* :class:`HttpClient` POSTs the same bodies to ``/v1/logprobs``,
  ``/v1/hidden_states``, and ``/v1/nsp``.

Clients correlate responses by ``request_id`` and support multiple
in-flight requests.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import shlex
import subprocess
import sys
import threading
from collections import deque
from typing import IO, Sequence

import numpy as np
import requests

from .errors import (
    CapabilityError,
    ProtocolError,
    ScoringError,
    TransportError,
    ValidationError,
)
from .protocol import (
    ErrorResponse,
    HiddenStateRequest,
    HiddenStateResponse,
    LogProbRequest,
    LogProbResponse,
    NspRequest,
    NspResponse,
    Request,
    Response,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
)


def _raise_error_response(resp: ErrorResponse) -> None:
    code = resp.error_code()
    if code == "validation":
        raise ValidationError(resp.error)
    if code == "capability":
        raise CapabilityError(resp.error)
    if code == "protocol":
        raise ProtocolError(resp.error)
    raise ScoringError(resp.error)


class MockBackend:
    """Pure in-process backend used as the test oracle substrate.

    Tokenization is whitespace splitting. Every token gets log-probability
    ``log(1/vocab_size)`` in both modes; hidden vectors are drawn from an
    RNG seeded by ``blake2b(seed | position | word)``, so identical text
    always yields identical matrices; NSP is always 0.5.
    """

    def __init__(self, vocab_size: int = 4, dim: int = 8, seed: int = 0,
                 supports_nsp: bool = True):
        if vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {vocab_size}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.vocab_size = vocab_size
        self.dim = dim
        self.seed = seed
        self.supports_nsp = supports_nsp
        self._uniform_logprob = -float(np.log(vocab_size))
        self._ids = itertools.count(1)

    def _next_id(self) -> str:
        return f"m{next(self._ids)}"

    @staticmethod
    def tokenize(text: str) -> list[str]:
        return text.split()

    def token_vector(self, word: str, position: int) -> np.ndarray:
        """Deterministic hash-derived vector for a (word, position) pair."""
        digest = hashlib.blake2b(
            f"{self.seed}|{position}|{word}".encode("utf-8"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        return rng.standard_normal(self.dim)

    def logprobs(self, context: str, target: str, mode: str = "causal") -> LogProbResponse:
        req = LogProbRequest(self._next_id(), context, target, mode)
        resp = self.handle(req)
        if isinstance(resp, ErrorResponse):
            _raise_error_response(resp)
        return resp

    def hidden_states(self, text: str) -> HiddenStateResponse:
        req = HiddenStateRequest(self._next_id(), text)
        resp = self.handle(req)
        if isinstance(resp, ErrorResponse):
            _raise_error_response(resp)
        return resp

    def nsp(self, sentence_a: str, sentence_b: str) -> NspResponse:
        req = NspRequest(self._next_id(), sentence_a, sentence_b)
        resp = self.handle(req)
        if isinstance(resp, ErrorResponse):
            _raise_error_response(resp)
        return resp

    def handle(self, request: Request) -> Response:
        """Answer a decoded protocol request (used by the stdio server)."""
        if isinstance(request, LogProbRequest):
            tokens = self.tokenize(request.target)
            if not tokens:
                return ErrorResponse(request.request_id,
                                     "validation: target has no tokens")
            return LogProbResponse(
                request.request_id,
                tuple(tokens),
                tuple(self._uniform_logprob for _ in tokens),
            )
        if isinstance(request, HiddenStateRequest):
            tokens = self.tokenize(request.target)
            if not tokens:
                return ErrorResponse(request.request_id,
                                     "validation: text has no tokens")
            matrix = tuple(
                tuple(float(v) for v in self.token_vector(word, pos))
                for pos, word in enumerate(tokens)
            )
            return HiddenStateResponse(request.request_id, matrix, self.dim)
        if isinstance(request, NspRequest):
            if not self.supports_nsp:
                return ErrorResponse(request.request_id,
                                     "capability: backend has no NSP head")
            return NspResponse(request.request_id, 0.5)
        return ErrorResponse(
            getattr(request, "request_id", ""),
            f"protocol: unsupported request {type(request).__name__}",
        )

    def close(self) -> None:
        pass


def mock_backend(vocab_size: int = 4, dim: int = 8, seed: int = 0) -> MockBackend:
    """Construct the deterministic mock backend."""
    return MockBackend(vocab_size=vocab_size, dim=dim, seed=seed)


class StdioClient:
    """Client for a child process speaking the protocol over stdin/stdout.

    A reader thread files responses by request_id, so requests issued from
    several threads can be in flight at once regardless of arrival order.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 60.0):
        args = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                args,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start backend {args!r}: {exc}") from exc
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._responses: dict[str, Response] = {}
        self._fatal: Exception | None = None
        self._stderr_tail: deque[str] = deque(maxlen=20)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._stderr_reader = threading.Thread(target=self._drain_stderr, daemon=True)
        self._stderr_reader.start()

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        try:
            for line in self._proc.stdout:
                if not line.strip():
                    continue
                try:
                    resp = decode_response(line)
                except (ProtocolError, ValidationError) as exc:
                    with self._cond:
                        self._fatal = exc
                        self._cond.notify_all()
                    return
                with self._cond:
                    self._responses[resp.request_id] = resp
                    self._cond.notify_all()
        finally:
            with self._cond:
                if self._fatal is None:
                    self._fatal = TransportError(
                        f"backend closed its stdout. stderr: {self._stderr()}"
                    )
                self._cond.notify_all()

    def _drain_stderr(self) -> None:
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            line = line.strip()
            if line:
                self._stderr_tail.append(line)

    def _stderr(self) -> str:
        return " | ".join(self._stderr_tail) or "<empty>"

    def _roundtrip(self, request: Request) -> Response:
        data = encode_request(request)
        if self._proc.poll() is not None:
            raise TransportError(
                f"backend process exited ({self._proc.returncode}). stderr: {self._stderr()}"
            )
        with self._lock:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(data.decode("utf-8"))
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"backend pipe broken: {exc}") from exc
        with self._cond:
            ok = self._cond.wait_for(
                lambda: request.request_id in self._responses or self._fatal is not None,
                timeout=self.timeout,
            )
            if request.request_id in self._responses:
                resp = self._responses.pop(request.request_id)
            elif self._fatal is not None:
                raise self._fatal
            elif not ok:
                raise TransportError(
                    f"timeout after {self.timeout}s waiting for {request.request_id}"
                )
            else:  # pragma: no cover - wait_for returned True with no data
                raise TransportError("response lost")
        if isinstance(resp, ErrorResponse):
            _raise_error_response(resp)
        return resp

    def _next_id(self) -> str:
        return f"q{next(self._ids)}"

    def logprobs(self, context: str, target: str, mode: str = "causal") -> LogProbResponse:
        resp = self._roundtrip(LogProbRequest(self._next_id(), context, target, mode))
        if not isinstance(resp, LogProbResponse):
            raise ProtocolError(f"expected logprobs_response, got {resp.kind}")
        return resp

    def hidden_states(self, text: str) -> HiddenStateResponse:
        resp = self._roundtrip(HiddenStateRequest(self._next_id(), text))
        if not isinstance(resp, HiddenStateResponse):
            raise ProtocolError(f"expected hidden_states_response, got {resp.kind}")
        return resp

    def nsp(self, sentence_a: str, sentence_b: str) -> NspResponse:
        resp = self._roundtrip(NspRequest(self._next_id(), sentence_a, sentence_b))
        if not isinstance(resp, NspResponse):
            raise ProtocolError(f"expected nsp_response, got {resp.kind}")
        return resp

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "StdioClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class HttpClient:
    """Client for an HTTP backend exposing the three ``/v1`` endpoints."""

    PATHS = {
        "logprobs": "/v1/logprobs",
        "hidden_states": "/v1/hidden_states",
        "nsp": "/v1/nsp",
    }

    def __init__(self, base_url: str, timeout: float = 60.0,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self._ids = itertools.count(1)

    def _next_id(self) -> str:
        return f"q{next(self._ids)}"

    def _post(self, request: Request) -> Response:
        url = self.base_url + self.PATHS[request.kind]
        try:
            reply = self._session.post(
                url,
                data=encode_request(request),
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransportError(f"{url}: {exc}") from exc
        if 400 <= reply.status_code < 500:
            try:
                resp = decode_response(reply.content)
            except (ProtocolError, ValidationError):
                raise ValidationError(f"{url}: HTTP {reply.status_code}: {reply.text[:200]}")
            if isinstance(resp, ErrorResponse):
                _raise_error_response(resp)
            raise ValidationError(f"{url}: HTTP {reply.status_code}")
        if reply.status_code >= 500:
            raise ScoringError(f"{url}: HTTP {reply.status_code}: {reply.text[:200]}")
        resp = decode_response(reply.content)
        if isinstance(resp, ErrorResponse):
            _raise_error_response(resp)
        return resp

    def logprobs(self, context: str, target: str, mode: str = "causal") -> LogProbResponse:
        resp = self._post(LogProbRequest(self._next_id(), context, target, mode))
        if not isinstance(resp, LogProbResponse):
            raise ProtocolError(f"expected logprobs_response, got {resp.kind}")
        return resp

    def hidden_states(self, text: str) -> HiddenStateResponse:
        resp = self._post(HiddenStateRequest(self._next_id(), text))
        if not isinstance(resp, HiddenStateResponse):
            raise ProtocolError(f"expected hidden_states_response, got {resp.kind}")
        return resp

    def nsp(self, sentence_a: str, sentence_b: str) -> NspResponse:
        resp = self._post(NspRequest(self._next_id(), sentence_a, sentence_b))
        if not isinstance(resp, NspResponse):
            raise ProtocolError(f"expected nsp_response, got {resp.kind}")
        return resp

    def close(self) -> None:
        self._session.close()

    def __enter__(self) -> "HttpClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def fetch_logprobs(client, context: str, target: str, mode: str = "causal") -> LogProbResponse:
    """Per-token natural-log probabilities of ``target`` given ``context``."""
    if not target:
        raise ValidationError("target must be non-empty")
    return client.logprobs(context, target, mode)


def fetch_hidden_states(client, text: str) -> HiddenStateResponse:
    """Per-token final-layer vectors for ``text``."""
    if not text:
        raise ValidationError("text must be non-empty")
    return client.hidden_states(text)


def fetch_nsp(client, sentence_a: str, sentence_b: str) -> NspResponse:
    """Probability that ``sentence_b`` follows ``sentence_a``."""
    if not sentence_a:
        raise ValidationError("sentence_a must be non-empty")
    if not sentence_b:
        raise ValidationError("sentence_b must be non-empty")
    return client.nsp(sentence_a, sentence_b)


def make_backend(spec: str, *, vocab_size: int = 4, dim: int = 8, seed: int = 0,
                 timeout: float = 60.0):
    """Build a backend from a ``mock`` / ``stdio:<cmd>`` / ``http:<url>`` spec."""
    if spec == "mock":
        return MockBackend(vocab_size=vocab_size, dim=dim, seed=seed)
    if spec.startswith("stdio:"):
        return StdioClient(spec[len("stdio:"):], timeout=timeout)
    for scheme in ("http", "https"):
        prefix = scheme + ":"
        if spec.startswith(prefix):
            rest = spec[len(prefix):]
            url = f"{scheme}:{rest}" if rest.startswith("//") else f"{scheme}://{rest}"
            return HttpClient(url, timeout=timeout)
    raise ValidationError(f"unknown backend spec {spec!r}")


def serve_stdio(backend: MockBackend, stdin: IO[str] | None = None,
                stdout: IO[str] | None = None) -> None:
    """Serve protocol requests over stdio until EOF.

    Malformed lines get an error response and the loop stays alive.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = decode_request(line)
            response = backend.handle(request)
        except (ProtocolError, ValidationError) as exc:
            rid = ""
            try:
                parsed = json.loads(line)
                if isinstance(parsed, dict):
                    rid = str(parsed.get("request_id", ""))
            except (json.JSONDecodeError, TypeError):
                pass
            prefix = "protocol" if isinstance(exc, ProtocolError) else "validation"
            response = ErrorResponse(rid, f"{prefix}: {exc}")
        stdout.write(encode_response(response).decode("utf-8"))
        stdout.flush()


def _main(argv: Sequence[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Serve the mock backend over stdio")
    parser.add_argument("--vocab-size", type=int, default=4)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    serve_stdio(MockBackend(args.vocab_size, args.dim, args.seed))
    return 0


if __name__ == "__main__":
    sys.exit(_main())
