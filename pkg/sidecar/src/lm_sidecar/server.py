"""Serve a model session over stdio (newline-delimited JSON) or HTTP.

Endpoints (HTTP): POST /v1/logprobs, /v1/hidden_states, /v1/nsp with the
request JSON as body; GET /v1/health. Status codes: 200 success, 400
validation/capability/protocol errors, 500 model errors. The stdio
transport answers one response line per request line and stays alive on
malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO, Any

from .protocol import SidecarError, encode, error_payload, parse_request
from .session import FAMILIES, ModelSession


def answer(session: ModelSession, request: dict[str, Any]) -> dict[str, Any]:
    """Compute the response payload for a validated request."""
    kind = request["kind"]
    rid = request["request_id"]
    try:
        if kind == "logprobs":
            tokens, logprobs, truncated = session.logprobs(
                request["context"], request["target"], request["mode"]
            )
            payload = {
                "kind": "logprobs_response",
                "request_id": rid,
                "tokens": tokens,
                "logprobs": logprobs,
            }
            if truncated is not None:
                payload["truncated_to"] = truncated
            return payload
        if kind == "hidden_states":
            matrix, dim, truncated = session.hidden_states(request["target"])
            payload = {
                "kind": "hidden_states_response",
                "request_id": rid,
                "matrix": matrix,
                "dim": dim,
            }
            if truncated is not None:
                payload["truncated_to"] = truncated
            return payload
        if kind == "nsp":
            p = session.nsp(request["context"], request["target"])
            return {"kind": "nsp_response", "request_id": rid, "p_is_next": p}
        raise SidecarError("protocol", f"unknown kind {kind!r}")
    except SidecarError:
        raise
    except Exception as exc:  # surface unexpected model failures on the wire
        raise SidecarError("model", f"{type(exc).__name__}: {exc}") from exc


def handle_line(session: ModelSession, line: str) -> dict[str, Any]:
    rid = ""
    try:
        parsed = json.loads(line)
        if isinstance(parsed, dict):
            rid = str(parsed.get("request_id", ""))
    except json.JSONDecodeError:
        pass
    try:
        return answer(session, parse_request(line))
    except SidecarError as exc:
        return error_payload(rid, exc)


def serve_stdio(session: ModelSession, stdin: IO[str] | None = None,
                stdout: IO[str] | None = None) -> None:
    """Answer requests line by line until EOF; never dies on bad input."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(encode(handle_line(session, line)).decode("utf-8"))
        stdout.flush()


_PATHS = {
    "/v1/logprobs": "logprobs",
    "/v1/hidden_states": "hidden_states",
    "/v1/nsp": "nsp",
}


def build_http_server(session: ModelSession, host: str = "127.0.0.1",
                      port: int = 0) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_GET(self):
            if self.path == "/v1/health":
                body = encode(
                    {
                        "status": "ok",
                        "model": session.model_name,
                        "family": session.family,
                    }
                )
                self._reply(200, body)
            else:
                self._reply(404, encode({"kind": "error", "request_id": "",
                                         "error": "protocol: no such path"}))

        def do_POST(self):
            kind = _PATHS.get(self.path)
            if kind is None:
                self._reply(404, encode({"kind": "error", "request_id": "",
                                         "error": "protocol: no such path"}))
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            rid = ""
            try:
                parsed = json.loads(body or b"{}")
                if isinstance(parsed, dict):
                    rid = str(parsed.get("request_id", ""))
            except json.JSONDecodeError:
                pass
            try:
                request = parse_request(body)
                if request["kind"] != kind:
                    raise SidecarError(
                        "validation",
                        f"kind {request['kind']!r} does not match path {self.path}",
                    )
                payload = answer(session, request)
                status = 200
            except SidecarError as exc:
                payload = error_payload(rid, exc)
                status = 500 if exc.code == "model" else 400
            self._reply(status, encode(payload))

        def _reply(self, status: int, body: bytes):
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lm-sidecar",
        description="Serve token log-probabilities, hidden states, and NSP "
        "over stdio or HTTP",
    )
    parser.add_argument("--model", required=True, help="model path or identifier")
    parser.add_argument("--mode", choices=FAMILIES, default="masked",
                        help="model family: masked encoder or causal decoder")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-window", type=int, default=None,
                        help="override the context window (tokens)")
    transport = parser.add_mutually_exclusive_group(required=True)
    transport.add_argument("--stdio", action="store_true",
                           help="serve newline-delimited JSON on stdin/stdout")
    transport.add_argument("--port", type=int, help="serve HTTP on this port")
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)

    session = ModelSession(
        args.model, family=args.mode, device=args.device, max_window=args.max_window
    )
    if args.stdio:
        print(f"serving {args.model} ({args.mode}) on stdio", file=sys.stderr)
        serve_stdio(session)
        return 0
    server = build_http_server(session, host=args.host, port=args.port)
    print(
        f"serving {args.model} ({args.mode}) on "
        f"http://{server.server_address[0]}:{server.server_address[1]}",
        file=sys.stderr,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
