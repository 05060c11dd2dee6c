import json
import math
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from sentmetrics.backend import (
    HttpClient,
    MockBackend,
    StdioClient,
    fetch_hidden_states,
    fetch_logprobs,
    fetch_nsp,
    make_backend,
    mock_backend,
)
from sentmetrics.errors import (
    CapabilityError,
    TransportError,
    ValidationError,
)
from sentmetrics.protocol import ErrorResponse, decode_request, encode_response

MOCK_CMD = [sys.executable, "-m", "sentmetrics.backend", "--vocab-size", "4", "--dim", "4"]


class TestMockBackend:
    def test_uniform_logprobs(self):
        backend = mock_backend(vocab_size=4, dim=4)
        resp = fetch_logprobs(backend, "some context", "one two three")
        assert len(resp.logprobs) == 3
        for lp in resp.logprobs:
            assert lp == pytest.approx(math.log(0.25), abs=1e-12)

    def test_vocab_size_v(self):
        for v in (2, 7, 1000):
            backend = mock_backend(vocab_size=v, dim=2)
            resp = fetch_logprobs(backend, "", "word")
            assert resp.logprobs[0] == pytest.approx(math.log(1 / v), rel=1e-12)

    def test_empty_target_validation(self):
        backend = mock_backend()
        with pytest.raises(ValidationError):
            fetch_logprobs(backend, "ctx", "")

    def test_hidden_states_shape_and_determinism(self):
        backend = mock_backend(vocab_size=4, dim=4, seed=11)
        a = fetch_hidden_states(backend, "hello world")
        assert len(a.matrix) == 2 and a.dim == 4
        b = fetch_hidden_states(backend, "hello world")
        assert a.matrix == b.matrix

    def test_same_word_position_same_vector(self):
        one = MockBackend(dim=6, seed=3)
        two = MockBackend(dim=6, seed=3)
        assert np.array_equal(one.token_vector("word", 5), two.token_vector("word", 5))

    def test_different_words_differ(self):
        backend = MockBackend(dim=6, seed=3)
        assert not np.array_equal(
            backend.token_vector("alpha", 0), backend.token_vector("beta", 0)
        )

    def test_different_seeds_differ(self):
        assert not np.array_equal(
            MockBackend(dim=6, seed=1).token_vector("w", 0),
            MockBackend(dim=6, seed=2).token_vector("w", 0),
        )

    def test_empty_text_validation(self):
        with pytest.raises(ValidationError):
            fetch_hidden_states(mock_backend(), "")

    def test_nsp_is_uninformative(self):
        resp = fetch_nsp(mock_backend(), "Sentence one.", "Sentence two.")
        assert resp.p_is_next == 0.5

    def test_nsp_capability_error(self):
        backend = MockBackend(supports_nsp=False)
        with pytest.raises(CapabilityError):
            fetch_nsp(backend, "A.", "B.")

    def test_nsp_empty_sentence_validation(self):
        with pytest.raises(ValidationError):
            fetch_nsp(mock_backend(), "A.", "")

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            MockBackend(vocab_size=1)
        with pytest.raises(ValueError):
            MockBackend(dim=0)

    def test_handle_is_byte_identical_for_identical_payloads(self):
        backend = MockBackend(vocab_size=4, dim=4, seed=0)
        req = decode_request('{"kind":"hidden_states","request_id":"r1","target":"a b"}')
        first = encode_response(backend.handle(req))
        second = encode_response(backend.handle(req))
        assert first == second


class TestStdioClient:
    def test_logprobs_round_trip(self):
        with StdioClient(MOCK_CMD, timeout=30) as client:
            resp = fetch_logprobs(client, "ctx", "a b c")
            assert len(resp.logprobs) == 3
            assert resp.logprobs[0] == pytest.approx(math.log(0.25), abs=1e-12)

    def test_hidden_states_and_nsp(self):
        with StdioClient(MOCK_CMD, timeout=30) as client:
            h = fetch_hidden_states(client, "x y")
            assert len(h.matrix) == 2 and h.dim == 4
            n = fetch_nsp(client, "A.", "B.")
            assert n.p_is_next == 0.5

    def test_concurrent_requests_correlated(self):
        with StdioClient(MOCK_CMD, timeout=30) as client:
            def grab(i):
                return len(fetch_logprobs(client, "", "w " * (i + 1)).logprobs)

            with ThreadPoolExecutor(max_workers=8) as pool:
                got = list(pool.map(grab, range(16)))
            assert got == [i + 1 for i in range(16)]

    def test_unreachable_command(self):
        with pytest.raises(TransportError):
            StdioClient(["/nonexistent/backend-binary"])

    def test_dead_process(self):
        client = StdioClient([sys.executable, "-c", "pass"], timeout=5)
        with pytest.raises(TransportError):
            client.logprobs("", "x")
        client.close()


class _MockHttpHandler(BaseHTTPRequestHandler):
    backend = MockBackend(vocab_size=4, dim=4, seed=0)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        if self.path == "/v1/boom":
            self._reply(500, b'{"kind":"error","request_id":"x","error":"model: boom"}')
            return
        try:
            request = decode_request(body)
            response = self.backend.handle(request)
        except Exception as exc:  # validation / protocol errors -> 4xx
            rid = ""
            try:
                rid = json.loads(body).get("request_id", "")
            except Exception:
                pass
            self._reply(400, encode_response(ErrorResponse(rid, f"validation: {exc}")))
            return
        status = 400 if isinstance(response, ErrorResponse) else 200
        self._reply(status, encode_response(response))

    def _reply(self, status, payload):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MockHttpHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestHttpClient:
    def test_round_trip(self, http_server):
        with HttpClient(http_server, timeout=10) as client:
            resp = fetch_logprobs(client, "", "a b")
            assert len(resp.logprobs) == 2
            h = fetch_hidden_states(client, "one two three")
            assert len(h.matrix) == 3
            n = fetch_nsp(client, "A.", "B.")
            assert n.p_is_next == 0.5

    def test_unreachable_endpoint(self):
        client = HttpClient("http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(TransportError):
            client.logprobs("", "x")

    def test_make_backend_parses_specs(self, http_server):
        assert isinstance(make_backend("mock"), MockBackend)
        client = make_backend("http:" + http_server[len("http:"):])
        assert isinstance(client, HttpClient)
        assert client.base_url == http_server
        with pytest.raises(ValidationError):
            make_backend("carrier-pigeon")
